#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tlbo/analysis.hpp"
#include "tlbo/benchmarks/cartpole.hpp"
#include "tlbo/benchmarks/grid.hpp"
#include "tlbo/benchmarks/synthetic.hpp"
#include "tlbo/pipeline.hpp"
#include "tlbo/table_io.hpp"

namespace tlbo {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Experiment configuration (versioned JSON schema)
// ---------------------------------------------------------------------------

enum class BenchmarkKind { cartpole, synthetic, grid };

struct BenchmarkConfig {
    BenchmarkKind kind = BenchmarkKind::synthetic;
    // cartpole
    std::size_t n_tasks = 5;
    std::uint64_t family_seed = 1;
    CartpoleSimOptions sim;
    // synthetic
    SyntheticKind synthetic_kind = SyntheticKind::shifted_quadratic;
    double shift_range = 0.2;
    // grid
    SearchSpace grid_space;
    std::vector<std::string> grid_files;
};

struct HistoricConfig {
    std::size_t n_evals = 50;
    std::vector<std::uint64_t> seeds = {1};
};

struct ExperimentConfig {
    int schema_version = 1;
    std::uint64_t master_seed = 0;
    std::string output_dir = "tlbo_out";
    BenchmarkConfig benchmark;
    HistoricConfig historic;
    std::vector<MethodSpec> methods;
    std::vector<std::uint64_t> seeds = {1};
};

namespace detail {

inline std::string sanitize_id(std::string s) {
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
    return s;
}

inline SearchSpace parse_space(const json& j) {
    std::vector<VariableSpec> vars;
    for (const auto& v : j) {
        const std::string kind = v.at("kind").get<std::string>();
        if (kind == "continuous")
            vars.push_back(VariableSpec::make_continuous(v.at("name").get<std::string>(),
                                                         v.at("lower").get<double>(),
                                                         v.at("upper").get<double>()));
        else if (kind == "integer")
            vars.push_back(VariableSpec::make_integer(v.at("name").get<std::string>(),
                                                      v.at("lower").get<std::int64_t>(),
                                                      v.at("upper").get<std::int64_t>()));
        else if (kind == "categorical")
            vars.push_back(VariableSpec::make_categorical(
                v.at("name").get<std::string>(),
                v.at("categories").get<std::vector<std::string>>()));
        else
            throw std::invalid_argument("unknown variable kind '" + kind + "'");
    }
    return SearchSpace(std::move(vars));
}

inline WeightStrategy parse_strategy(const std::string& s) {
    if (s == "lasso") return WeightStrategy::lasso;
    if (s == "ridge") return WeightStrategy::ridge;
    if (s == "rgpe") return WeightStrategy::rgpe;
    if (s == "tstr") return WeightStrategy::tstr;
    if (s == "wac") return WeightStrategy::wac;
    if (s == "target_only") return WeightStrategy::target_only;
    if (s == "standard_bo") return WeightStrategy::standard_bo;
    throw std::invalid_argument("unknown weighting strategy '" + s + "'");
}

inline MethodSpec parse_method(const json& j) {
    MethodSpec m;
    m.id = j.at("id").get<std::string>();
    if (m.id != sanitize_id(m.id))
        throw std::invalid_argument("method id '" + m.id + "' must be filename-safe");
    const std::string init = j.value("init", "random");
    if (init == "random")
        m.init_mode = InitMode::random;
    else if (init == "warm_start")
        m.init_mode = InitMode::warm_start;
    else
        throw std::invalid_argument("unknown init mode '" + init + "'");
    m.n_init = j.value("n_init", m.init_mode == InitMode::random ? std::size_t{10} : std::size_t{2});
    m.weighting.strategy = parse_strategy(j.value("weighting", "standard_bo"));
    m.weighting.positive_constraint = j.value("positive_constraint", false);
    if (j.contains("alpha") && !j.at("alpha").is_null())
        m.weighting.alpha = j.at("alpha").get<double>();
    m.weighting.bandwidth_rho = j.value("bandwidth_rho", 0.1);
    m.weighting.bootstrap_samples = j.value("bootstrap_samples", std::size_t{1000});
    if (j.contains("sgd")) {
        const auto& s = j.at("sgd");
        m.weighting.sgd.learning_rate = s.value("learning_rate", 0.01);
        m.weighting.sgd.epochs = s.value("epochs", std::size_t{500});
        m.weighting.sgd.l2_penalty = s.value("l2_penalty", 0.01);
        m.weighting.sgd.validation_fraction = s.value("validation_fraction", 0.2);
    }
    const std::string guard = j.value("guard", "none");
    if (guard == "none")
        m.guard = GuardKind::none;
    else if (guard == "weight_dilution")
        m.guard = GuardKind::weight_dilution;
    else if (guard == "mode_switch")
        m.guard = GuardKind::mode_switch;
    else
        throw std::invalid_argument("unknown guard '" + guard + "'");
    m.guard_kfolds = j.value("guard_k", std::size_t{3});
    if (j.contains("acquisition")) {
        const auto& a = j.at("acquisition");
        m.acquisition.beta = a.value("beta", 2.0);
        m.acquisition.n_random_candidates = a.value("n_random_candidates", std::size_t{2000});
        m.acquisition.n_local_steps = a.value("n_local_steps", std::size_t{20});
        m.acquisition.local_neighbors = a.value("local_neighbors", std::size_t{10});
    }
    m.budget = j.value("budget", std::size_t{100});
    if (j.contains("gp")) m.gp_fit.restarts = j.at("gp").value("restarts", std::size_t{5});
    m.validate();
    return m;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const json& j) {
    ExperimentConfig cfg;
    cfg.schema_version = j.value("schema_version", 1);
    if (cfg.schema_version != 1)
        throw std::invalid_argument("unsupported schema_version " +
                                    std::to_string(cfg.schema_version));
    cfg.master_seed = j.value("master_seed", std::uint64_t{0});
    cfg.output_dir = j.value("output_dir", std::string("tlbo_out"));

    const auto& b = j.at("benchmark");
    const std::string kind = b.at("kind").get<std::string>();
    if (kind == "cartpole") {
        cfg.benchmark.kind = BenchmarkKind::cartpole;
        cfg.benchmark.n_tasks = b.value("n_tasks", std::size_t{5});
        cfg.benchmark.family_seed = b.value("family_seed", std::uint64_t{1});
        if (b.contains("sim")) {
            const auto& s = b.at("sim");
            cfg.benchmark.sim.dt = s.value("dt", 0.01);
            cfg.benchmark.sim.steps = s.value("steps", std::size_t{1000});
            if (s.contains("initial_state")) {
                const auto v = s.at("initial_state").get<std::vector<double>>();
                if (v.size() != 4)
                    throw std::invalid_argument("initial_state needs 4 components");
                std::copy(v.begin(), v.end(), cfg.benchmark.sim.initial_state.begin());
            }
        }
    } else if (kind == "synthetic") {
        cfg.benchmark.kind = BenchmarkKind::synthetic;
        const std::string sk = b.value("synthetic_kind", "shifted_quadratic");
        if (sk == "shifted_quadratic")
            cfg.benchmark.synthetic_kind = SyntheticKind::shifted_quadratic;
        else if (sk == "shifted_branin")
            cfg.benchmark.synthetic_kind = SyntheticKind::shifted_branin;
        else
            throw std::invalid_argument("unknown synthetic kind '" + sk + "'");
        cfg.benchmark.n_tasks = b.value("n_tasks", std::size_t{5});
        cfg.benchmark.shift_range = b.value("shift_range", 0.2);
        cfg.benchmark.family_seed = b.value("family_seed", std::uint64_t{1});
    } else if (kind == "grid") {
        cfg.benchmark.kind = BenchmarkKind::grid;
        cfg.benchmark.grid_space = detail::parse_space(b.at("space"));
        cfg.benchmark.grid_files = b.at("files").get<std::vector<std::string>>();
        for (const auto& f : cfg.benchmark.grid_files)
            if (!std::filesystem::exists(f))
                throw std::invalid_argument("grid file does not exist: " + f);
    } else {
        throw std::invalid_argument("unknown benchmark kind '" + kind + "'");
    }

    if (j.contains("historic")) {
        cfg.historic.n_evals = j.at("historic").value("n_evals", std::size_t{50});
        if (j.at("historic").contains("seeds"))
            cfg.historic.seeds = j.at("historic").at("seeds").get<std::vector<std::uint64_t>>();
    }
    if (cfg.historic.seeds.empty())
        throw std::invalid_argument("historic needs at least one seed");

    std::set<std::string> ids;
    for (const auto& mj : j.at("methods")) {
        auto m = detail::parse_method(mj);
        if (!ids.insert(m.id).second)
            throw std::invalid_argument("duplicate method id '" + m.id + "'");
        cfg.methods.push_back(std::move(m));
    }
    if (cfg.methods.empty()) throw std::invalid_argument("no methods configured");

    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) throw std::invalid_argument("need at least one run seed");
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    json j;
    in >> j;
    return parse_experiment_config(j);
}

inline std::vector<BenchmarkTask> build_tasks(const BenchmarkConfig& b) {
    switch (b.kind) {
        case BenchmarkKind::cartpole:
            return make_cartpole_tasks(sample_cartpole_family(b.n_tasks, b.family_seed), b.sim);
        case BenchmarkKind::synthetic:
            return synthetic_family(b.synthetic_kind, b.n_tasks, b.shift_range, b.family_seed)
                .tasks;
        case BenchmarkKind::grid:
            return load_grid_tasks(b.grid_files, b.grid_space);
    }
    throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// Filesystem layout and persistence
// ---------------------------------------------------------------------------

namespace detail {

namespace fs = std::filesystem;

inline fs::path historic_dir(const ExperimentConfig& cfg) {
    return fs::path(cfg.output_dir) / "historic";
}
inline fs::path records_dir(const ExperimentConfig& cfg) {
    return fs::path(cfg.output_dir) / "records";
}
inline fs::path analysis_dir(const ExperimentConfig& cfg) {
    return fs::path(cfg.output_dir) / "analysis";
}
inline fs::path historic_file(const ExperimentConfig& cfg, const std::string& task,
                              std::uint64_t seed) {
    return historic_dir(cfg) / (sanitize_id(task) + "__s" + std::to_string(seed) + ".csv");
}
inline fs::path record_file(const ExperimentConfig& cfg, const std::string& method,
                            const std::string& task, std::uint64_t seed) {
    return records_dir(cfg) /
           (method + "__" + sanitize_id(task) + "__s" + std::to_string(seed) + ".json");
}

// Atomic publish: write the whole payload to a sibling temp file, then
// rename over the target.
inline void write_file_atomic(const fs::path& path, const std::string& payload) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << payload;
    }
    fs::rename(tmp, path);
}

}  // namespace detail

inline json run_record_to_json(const RunRecord& r, std::uint64_t config_seed) {
    json j;
    j["schema_version"] = 1;
    j["method"] = r.method_id;
    j["task"] = r.task_id;
    j["seed"] = config_seed;
    j["run_seed"] = r.seed;
    j["failed"] = r.failed;
    j["error"] = r.error;
    json iters = json::array();
    for (const auto& it : r.iterations) {
        json ji;
        ji["config"] = it.config.values();
        ji["observed"] = it.observed;
        ji["incumbent"] = it.incumbent;
        ji["weights"] = it.weights;
        ji["guard_mode"] = it.guard_mode;
        iters.push_back(std::move(ji));
    }
    j["iterations"] = std::move(iters);
    return j;
}

inline RunRecord run_record_from_json(const json& j) {
    RunRecord r;
    r.method_id = j.at("method").get<std::string>();
    r.task_id = j.at("task").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.failed = j.value("failed", false);
    r.error = j.value("error", std::string{});
    for (const auto& ji : j.at("iterations")) {
        IterationRecord it;
        it.config = Configuration(ji.at("config").get<std::vector<double>>());
        it.observed = ji.at("observed").get<double>();
        it.incumbent = ji.at("incumbent").get<double>();
        it.weights = ji.value("weights", std::vector<double>{});
        it.guard_mode = ji.value("guard_mode", std::string{});
        r.iterations.push_back(std::move(it));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

// Writes one historic dataset file per (task, historic seed), plus the
// cartpole parameter table when that family is in play.
inline int cmd_generate_historic(const ExperimentConfig& cfg, std::ostream& log = std::cerr) {
    namespace fs = std::filesystem;
    const auto tasks = build_tasks(cfg.benchmark);
    fs::create_directories(detail::historic_dir(cfg));

    if (cfg.benchmark.kind == BenchmarkKind::cartpole) {
        const auto family = sample_cartpole_family(cfg.benchmark.n_tasks, cfg.benchmark.family_seed);
        std::string payload =
            "# cartpole family, family_seed=" + std::to_string(cfg.benchmark.family_seed) + "\n";
        payload += "task,cart_mass,pole_mass,pole_length,cart_friction,pole_friction\n";
        for (std::size_t i = 0; i < family.size(); ++i) {
            payload += tasks[i].id + "," + format_double(family[i].cart_mass) + "," +
                       format_double(family[i].pole_mass) + "," +
                       format_double(family[i].pole_length) + "," +
                       format_double(family[i].cart_friction) + "," +
                       format_double(family[i].pole_friction) + "\n";
        }
        detail::write_file_atomic(fs::path(cfg.output_dir) / "cartpole_family.csv", payload);
    }

    MethodSpec base;
    base.n_init = std::min<std::size_t>(10, cfg.historic.n_evals);
    for (const auto& task : tasks) {
        for (const auto s : cfg.historic.seeds) {
            const auto path = detail::historic_file(cfg, task.id, s);
            const auto datasets = generate_historic(
                {task}, cfg.historic.n_evals, {derive_seed(cfg.master_seed, "historic", s)},
                &base);
            std::ostringstream out;
            write_config_table(out, task.space, datasets[0].inputs, datasets[0].outputs,
                               {"task: " + task.id, "historic_seed: " + std::to_string(s),
                                "n_evals: " + std::to_string(cfg.historic.n_evals),
                                "master_seed: " + std::to_string(cfg.master_seed),
                                "schema: tlbo-dataset-v1"});
            detail::write_file_atomic(path, out.str());
            log << "wrote " << path.string() << " (" << datasets[0].size() << " rows)\n";
        }
    }
    return 0;
}

// Historic datasets for every (task, historic seed) pair, read back from
// the files generate-historic wrote.
inline std::map<std::pair<std::string, std::uint64_t>, ObservationDataset> load_historic(
    const ExperimentConfig& cfg, const std::vector<BenchmarkTask>& tasks) {
    std::map<std::pair<std::string, std::uint64_t>, ObservationDataset> out;
    for (const auto& task : tasks) {
        for (const auto s : cfg.historic.seeds) {
            const auto path = detail::historic_file(cfg, task.id, s);
            if (!std::filesystem::exists(path))
                throw std::runtime_error("missing historic dataset '" + path.string() +
                                         "' (run generate-historic first)");
            auto table = read_config_table_file(path.string(), task.space);
            ObservationDataset d;
            d.task_id = task.id;
            d.inputs = std::move(table.inputs);
            d.outputs = std::move(table.objectives);
            out[{task.id, s}] = std::move(d);
        }
    }
    return out;
}

// Executes every (method, target task, seed) cell with leave-one-task-out
// sources, fanning out across a worker pool. Completed cells (already in
// the index) are skipped; per-cell failures are recorded and the remaining
// cells still run.
inline int cmd_run(const ExperimentConfig& cfg, std::size_t workers,
                   std::ostream& log = std::cerr) {
    namespace fs = std::filesystem;
    const auto tasks = build_tasks(cfg.benchmark);
    fs::create_directories(detail::records_dir(cfg));

    const bool any_needs_historic =
        std::any_of(cfg.methods.begin(), cfg.methods.end(), [](const MethodSpec& m) {
            return m.uses_ensemble_weights() || m.init_mode == InitMode::warm_start;
        });
    std::map<std::pair<std::string, std::uint64_t>, ObservationDataset> historic;
    if (any_needs_historic) historic = load_historic(cfg, tasks);

    struct Cell {
        const MethodSpec* method;
        const BenchmarkTask* task;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    std::set<std::string> done;
    const auto index_path = detail::records_dir(cfg) / "index.csv";
    if (fs::exists(index_path)) {
        std::ifstream in(index_path);
        std::string line;
        while (std::getline(in, line)) {
            const auto cells_csv = detail::split_csv(line);
            if (cells_csv.size() >= 4 && cells_csv[0] != "method" &&
                fs::exists(detail::records_dir(cfg) / cells_csv[3]))
                done.insert(cells_csv[0] + "|" + cells_csv[1] + "|" + cells_csv[2]);
        }
    }
    for (const auto& m : cfg.methods)
        for (const auto& t : tasks)
            for (const auto s : cfg.seeds)
                if (!done.count(m.id + "|" + t.id + "|" + std::to_string(s)))
                    cells.push_back({&m, &t, s});

    std::mutex io_mutex;
    std::vector<std::string> index_lines;
    std::vector<std::string> timing_lines;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> any_failed{false};

    const auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const auto& cell = cells[i];
            const auto t0 = std::chrono::steady_clock::now();

            std::vector<ObservationDataset> sources;
            for (const auto& [key, d] : historic)
                if (key.first != cell.task->id) sources.push_back(d);

            const std::uint64_t cell_seed = run_seed(
                derive_seed(cfg.master_seed, "seed", cell.seed), cell.method->id, cell.task->id);
            RunRecord record;
            try {
                record = run_bo(*cell.method, *cell.task, sources, cell_seed);
            } catch (const std::exception& e) {
                record.method_id = cell.method->id;
                record.task_id = cell.task->id;
                record.seed = cell_seed;
                record.failed = true;
                record.error = e.what();
            }
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

            const auto path = detail::record_file(cfg, cell.method->id, cell.task->id, cell.seed);
            detail::write_file_atomic(path, run_record_to_json(record, cell.seed).dump(2) + "\n");
            if (record.failed) any_failed = true;

            std::lock_guard<std::mutex> lock(io_mutex);
            index_lines.push_back(cell.method->id + "," + cell.task->id + "," +
                                  std::to_string(cell.seed) + "," + path.filename().string() +
                                  "," + (record.failed ? "failed" : "ok"));
            timing_lines.push_back(cell.method->id + "," + cell.task->id + "," +
                                   std::to_string(cell.seed) + "," + format_double(secs));
            // Append-only progress so interrupted runs can resume.
            std::ofstream idx(index_path, std::ios::app);
            idx << index_lines.back() << "\n";
            log << "cell " << cell.method->id << " / " << cell.task->id << " / s" << cell.seed
                << (record.failed ? " FAILED: " + record.error : " ok") << " (" << secs
                << "s)\n";
        }
    };

    std::vector<std::thread> pool;
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, cells.size()));
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    // Rewrite the index sorted and complete so its bytes are deterministic.
    std::set<std::string> all_lines(index_lines.begin(), index_lines.end());
    if (fs::exists(index_path)) {
        std::ifstream in(index_path);
        std::string line;
        while (std::getline(in, line))
            if (!line.empty() && line.rfind("method,", 0) != 0) all_lines.insert(line);
    }
    std::string index_payload = "method,task,seed,file,status\n";
    for (const auto& l : all_lines) index_payload += l + "\n";
    detail::write_file_atomic(index_path, index_payload);

    {
        std::ofstream timing(detail::records_dir(cfg) / "timings.csv", std::ios::app);
        for (const auto& l : timing_lines) timing << l << "\n";
    }
    return any_failed ? 1 : 0;
}

// Reads persisted records plus historic datasets and writes the four
// analysis tables: regret curves, rank curves, per-task overlap
// probabilities and the cluster scatter.
inline int cmd_analyze(const ExperimentConfig& cfg, std::ostream& log = std::cerr) {
    namespace fs = std::filesystem;
    const auto tasks = build_tasks(cfg.benchmark);
    fs::create_directories(detail::analysis_dir(cfg));

    const auto index_path = detail::records_dir(cfg) / "index.csv";
    if (!fs::exists(index_path))
        throw std::runtime_error("no record index at '" + index_path.string() + "'");
    std::vector<std::string> files;
    {
        std::ifstream in(index_path);
        std::string line;
        while (std::getline(in, line)) {
            const auto cells = detail::split_csv(line);
            if (cells.size() >= 4 && cells[0] != "method") files.push_back(cells[3]);
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<RunRecord> records;
    for (const auto& f : files) {
        std::ifstream in(detail::records_dir(cfg) / f);
        if (!in) throw std::runtime_error("missing record file '" + f + "'");
        json j;
        in >> j;
        auto r = run_record_from_json(j);
        if (r.failed) {
            log << "skipping failed record " << f << "\n";
            continue;
        }
        records.push_back(std::move(r));
    }
    if (records.empty()) throw std::runtime_error("no successful records to analyze");

    // Output ranges: the true range where the task knows it, otherwise the
    // union of every evaluation recorded for the task in this set.
    std::map<std::string, std::pair<double, double>> ranges;
    std::set<std::string> known;
    for (const auto& t : tasks)
        if (t.known_range) {
            ranges[t.id] = *t.known_range;
            known.insert(t.id);
        }
    for (const auto& r : records) {
        if (known.count(r.task_id)) continue;
        auto& range = ranges
                          .try_emplace(r.task_id, std::numeric_limits<double>::infinity(),
                                       -std::numeric_limits<double>::infinity())
                          .first->second;
        for (const auto& it : r.iterations) {
            range.first = std::min(range.first, it.observed);
            range.second = std::max(range.second, it.observed);
        }
    }

    const auto curves = normalized_regret(records, ranges);
    {
        std::string payload =
            "# normalized regret: (incumbent - task_min) / (task_max - task_min)\n"
            "# task ranges: known_range where available, otherwise the min/max over all\n"
            "# evaluations recorded for the task in the analyzed record set\n"
            "method,iteration,mean_normalized_regret,n_combinations\n";
        for (const auto& c : curves)
            for (std::size_t t = 0; t < c.mean_regret.size(); ++t)
                payload += c.method_id + "," + std::to_string(t + 1) + "," +
                           format_double(c.mean_regret[t]) + "," +
                           std::to_string(c.n_combinations) + "\n";
        detail::write_file_atomic(detail::analysis_dir(cfg) / "regret_curves.csv", payload);
    }

    std::set<std::string> method_ids;
    for (const auto& r : records) method_ids.insert(r.method_id);
    if (method_ids.size() < 2) {
        log << "warning: rank export skipped: ranking needs at least two methods\n";
    } else {
        try {
            const auto ranks = ranking_curves(records);
            std::string payload =
                "# mean rank per iteration, ranked by incumbent per (task, seed), average ties\n"
                "method,iteration,mean_rank\n";
            for (const auto& c : ranks)
                for (std::size_t t = 0; t < c.mean_rank.size(); ++t)
                    payload += c.method_id + "," + std::to_string(t + 1) + "," +
                               format_double(c.mean_rank[t]) + "\n";
            detail::write_file_atomic(detail::analysis_dir(cfg) / "rank_curves.csv", payload);
        } catch (const std::exception& e) {
            log << "warning: rank export skipped: " << e.what() << "\n";
        }
    }

    // Minima overlap analysis over the historic datasets.
    const auto historic = load_historic(cfg, tasks);
    std::vector<MinimaPoint> minima;
    const SearchSpace& space = tasks.front().space;
    for (const auto& [key, dataset] : historic)
        for (const auto& x : filter_minima(dataset))
            minima.push_back({key.first, key.second, x});
    if (!minima.empty()) {
        const auto agg = agglomerative_clusters(minima, space, 0.02);
        std::vector<std::string> task_ids;
        for (const auto& t : tasks) task_ids.push_back(t.id);
        const auto overlap = overlap_probability(cluster_ids_by_cell(agg), task_ids);
        for (const auto& w : overlap.warnings) log << "warning: " << w << "\n";
        {
            std::string payload =
                "# probability of at least one overlapping minima cluster per task\n"
                "# agglomerative complete linkage, gower distance threshold 0.02, S=" +
                std::to_string(cfg.historic.seeds.size()) + " historic seeds\n" +
                "task,probability\n";
            for (const auto& t : task_ids)
                payload += t + "," + format_double(overlap.probability.at(t)) + "\n";
            detail::write_file_atomic(detail::analysis_dir(cfg) / "overlap_probability.csv",
                                      payload);
        }
        auto spect = spectral_clusters(minima, space, agg.n_clusters);
        if (!spect.warning.empty()) log << "warning: " << spect.warning << "\n";
        {
            std::string payload =
                "# minima cluster assignments per (task, historic seed) point\n"
                "algorithm,task,seed,point,cluster\n";
            const auto dump = [&](const char* name, const ClusterAssignment& a) {
                for (std::size_t i = 0; i < a.points.size(); ++i)
                    payload += std::string(name) + "," + a.points[i].task_id + "," +
                               std::to_string(a.points[i].seed) + "," + std::to_string(i) +
                               "," + std::to_string(a.labels[i]) + "\n";
            };
            dump("agglomerative", agg);
            dump("spectral", spect);
            detail::write_file_atomic(detail::analysis_dir(cfg) / "cluster_scatter.csv", payload);
        }
    } else {
        log << "warning: no minima points; overlap analysis skipped\n";
    }
    return 0;
}

}  // namespace tlbo
