#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tlbo/experiment.hpp"

using namespace tlbo;
namespace fs = std::filesystem;

namespace {

json tiny_config(const std::string& out_dir) {
    json j;
    j["schema_version"] = 1;
    j["master_seed"] = 7;
    j["output_dir"] = out_dir;
    j["benchmark"] = {{"kind", "synthetic"},
                      {"synthetic_kind", "shifted_quadratic"},
                      {"n_tasks", 2},
                      {"shift_range", 0.15},
                      {"family_seed", 3}};
    j["historic"] = {{"n_evals", 8}, {"seeds", {1}}};
    json acq = {{"n_random_candidates", 100}, {"n_local_steps", 5}};
    json gp = {{"restarts", 2}};
    j["methods"] = json::array(
        {json{{"id", "standard_bo"}, {"weighting", "standard_bo"}, {"n_init", 4},
              {"budget", 8}, {"acquisition", acq}, {"gp", gp}},
         json{{"id", "tstr"}, {"weighting", "tstr"}, {"n_init", 4}, {"budget", 8},
              {"bootstrap_samples", 20}, {"acquisition", acq}, {"gp", gp}}});
    j["seeds"] = {1, 2};
    return j;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("tlbo_test_" + std::to_string(Rng(std::random_device{}()).next_u64()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("shipped example configs load") {
    for (const char* name : {"cartpole_small.json", "synthetic_small.json"}) {
        const auto path = fs::path(TLBO_SOURCE_DIR) / "configs" / name;
        const auto cfg = load_experiment_config(path.string());
        REQUIRE(!cfg.methods.empty());
        REQUIRE(!cfg.seeds.empty());
        REQUIRE(!build_tasks(cfg.benchmark).empty());
    }
}

TEST_CASE("experiment config parsing applies defaults and validates") {
    TempDir tmp;
    const auto cfg = parse_experiment_config(tiny_config((tmp.path / "out").string()));
    REQUIRE(cfg.methods.size() == 2);
    REQUIRE(cfg.methods[0].budget == 8);
    REQUIRE(cfg.methods[1].weighting.strategy == WeightStrategy::tstr);
    REQUIRE(cfg.methods[1].weighting.bootstrap_samples == 20);
    REQUIRE(cfg.methods[1].weighting.bandwidth_rho == 0.1);
    REQUIRE(cfg.seeds == std::vector<std::uint64_t>{1, 2});

    // Historic defaults apply when the block is omitted.
    auto no_historic = tiny_config((tmp.path / "out").string());
    no_historic.erase("historic");
    const auto defaults = parse_experiment_config(no_historic);
    REQUIRE(defaults.historic.n_evals == 50);
    REQUIRE(defaults.historic.seeds == std::vector<std::uint64_t>{1});

    auto dup = tiny_config((tmp.path / "out").string());
    dup["methods"][1]["id"] = "standard_bo";
    REQUIRE_THROWS_AS(parse_experiment_config(dup), std::invalid_argument);

    auto bad_guard = tiny_config((tmp.path / "out").string());
    bad_guard["methods"][0]["guard"] = "mode_switch";
    REQUIRE_THROWS_AS(parse_experiment_config(bad_guard), std::invalid_argument);

    auto missing_grid = tiny_config((tmp.path / "out").string());
    missing_grid["benchmark"] = {{"kind", "grid"},
                                 {"space", json::array({json{{"name", "x"},
                                                             {"kind", "continuous"},
                                                             {"lower", 0.0},
                                                             {"upper", 1.0}}})},
                                 {"files", {"/nonexistent/task.csv"}}};
    REQUIRE_THROWS_WITH(parse_experiment_config(missing_grid),
                        Catch::Matchers::ContainsSubstring("/nonexistent/task.csv"));

    // Default init counts: 10 random, 2 warm start.
    json m = {{"id", "a"}, {"weighting", "rgpe"}};
    REQUIRE(detail::parse_method(m).n_init == 10);
    m["init"] = "warm_start";
    REQUIRE(detail::parse_method(m).n_init == 2);
}

TEST_CASE("run records survive the json round trip") {
    RunRecord r;
    r.method_id = "m";
    r.task_id = "t";
    r.seed = 123;
    IterationRecord it;
    it.config = Configuration({0.25, 1.0});
    it.observed = 0.125;
    it.incumbent = 0.125;
    it.weights = {0.5, 0.5};
    it.guard_mode = "ensemble";
    r.iterations.push_back(it);
    const auto j = run_record_to_json(r, 9);
    const auto back = run_record_from_json(j);
    REQUIRE(back.method_id == "m");
    REQUIRE(back.seed == 9);  // config-level seed is the record key
    REQUIRE(back.iterations.size() == 1);
    REQUIRE(back.iterations[0].config == r.iterations[0].config);
    REQUIRE(back.iterations[0].observed == r.iterations[0].observed);
    REQUIRE(back.iterations[0].weights == r.iterations[0].weights);
}

TEST_CASE("harness end to end: generate, run, resume, analyze") {
    TempDir tmp;
    const auto out_dir = (tmp.path / "out").string();
    const auto cfg = parse_experiment_config(tiny_config(out_dir));
    std::ostringstream log;

    REQUIRE(cmd_generate_historic(cfg, log) == 0);
    for (const auto& task : build_tasks(cfg.benchmark)) {
        const auto p = fs::path(out_dir) / "historic" / (task.id + "__s1.csv");
        REQUIRE(fs::exists(p));
        const auto table = read_config_table_file(p.string(), task.space);
        REQUIRE(table.inputs.size() == 8);
        REQUIRE(!table.provenance.empty());
    }

    // Byte-identical regeneration.
    const auto first = slurp(fs::path(out_dir) / "historic" / "quadratic_0__s1.csv");
    REQUIRE(cmd_generate_historic(cfg, log) == 0);
    REQUIRE(slurp(fs::path(out_dir) / "historic" / "quadratic_0__s1.csv") == first);

    REQUIRE(cmd_run(cfg, 2, log) == 0);
    const auto index_path = fs::path(out_dir) / "records" / "index.csv";
    REQUIRE(fs::exists(index_path));
    std::size_t record_count = 0;
    for (const auto& e : fs::directory_iterator(fs::path(out_dir) / "records"))
        if (e.path().extension() == ".json") ++record_count;
    REQUIRE(record_count == 8);  // 2 methods x 2 tasks x 2 seeds

    // Resume: a re-invocation finds every cell complete and reruns nothing.
    const auto index_before = slurp(index_path);
    const auto record_before =
        slurp(fs::path(out_dir) / "records" / "tstr__quadratic_1__s2.json");
    std::ostringstream resume_log;
    REQUIRE(cmd_run(cfg, 2, resume_log) == 0);
    REQUIRE(resume_log.str().find("cell ") == std::string::npos);
    REQUIRE(slurp(index_path) == index_before);

    // Determinism across worker counts: wipe records, rerun with 1 worker.
    fs::remove_all(fs::path(out_dir) / "records");
    REQUIRE(cmd_run(cfg, 1, log) == 0);
    REQUIRE(slurp(fs::path(out_dir) / "records" / "tstr__quadratic_1__s2.json") ==
            record_before);
    REQUIRE(slurp(index_path) == index_before);

    REQUIRE(cmd_analyze(cfg, log) == 0);
    for (const char* name :
         {"regret_curves.csv", "rank_curves.csv", "overlap_probability.csv",
          "cluster_scatter.csv"})
        REQUIRE(fs::exists(fs::path(out_dir) / "analysis" / name));

    // Regret values parse and stay in [0, 1].
    std::ifstream regret(fs::path(out_dir) / "analysis" / "regret_curves.csv");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(regret, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("method,", 0) == 0) continue;
        const auto cells = detail::split_csv(line);
        REQUIRE(cells.size() == 4);
        const double v = std::stod(cells[2]);
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
        ++rows;
    }
    REQUIRE(rows == 16);  // 2 methods x 8 iterations

    // Re-analysis of unchanged records is byte-identical.
    const auto regret_before = slurp(fs::path(out_dir) / "analysis" / "regret_curves.csv");
    REQUIRE(cmd_analyze(cfg, log) == 0);
    REQUIRE(slurp(fs::path(out_dir) / "analysis" / "regret_curves.csv") == regret_before);
}

TEST_CASE("single-method analysis skips the rank table with a warning") {
    TempDir tmp;
    const auto out_dir = (tmp.path / "out").string();
    auto j = tiny_config(out_dir);
    j["methods"] = json::array({j["methods"][0]});
    j["seeds"] = {1};
    const auto cfg = parse_experiment_config(j);
    std::ostringstream log;
    REQUIRE(cmd_generate_historic(cfg, log) == 0);
    REQUIRE(cmd_run(cfg, 1, log) == 0);
    std::ostringstream log2;
    REQUIRE(cmd_analyze(cfg, log2) == 0);
    REQUIRE(log2.str().find("rank export skipped") != std::string::npos);
    REQUIRE(fs::exists(fs::path(out_dir) / "analysis" / "regret_curves.csv"));
    REQUIRE(!fs::exists(fs::path(out_dir) / "analysis" / "rank_curves.csv"));
}

TEST_CASE("incomplete method grids emit regret but skip ranks") {
    TempDir tmp;
    const auto out_dir = (tmp.path / "out").string();
    const auto cfg = parse_experiment_config(tiny_config(out_dir));
    std::ostringstream log;
    REQUIRE(cmd_generate_historic(cfg, log) == 0);
    REQUIRE(cmd_run(cfg, 2, log) == 0);

    // Forge one record into a failure so the grid becomes incomplete.
    const auto victim = fs::path(out_dir) / "records" / "tstr__quadratic_0__s1.json";
    json j;
    {
        std::ifstream in(victim);
        in >> j;
    }
    j["failed"] = true;
    j["error"] = "forged for test";
    {
        std::ofstream out(victim, std::ios::trunc);
        out << j.dump(2) << "\n";
    }
    std::ostringstream log2;
    REQUIRE(cmd_analyze(cfg, log2) == 0);
    REQUIRE(log2.str().find("rank export skipped") != std::string::npos);
    REQUIRE(fs::exists(fs::path(out_dir) / "analysis" / "regret_curves.csv"));
    REQUIRE(!fs::exists(fs::path(out_dir) / "analysis" / "rank_curves.csv"));
}
