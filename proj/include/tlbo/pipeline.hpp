#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlbo/acquisition.hpp"
#include "tlbo/benchmarks/task.hpp"
#include "tlbo/ensemble.hpp"
#include "tlbo/initialisation.hpp"
#include "tlbo/transfer_guard.hpp"
#include "tlbo/weighting.hpp"

namespace tlbo {

enum class InitMode { random, warm_start };
enum class GuardKind { none, weight_dilution, mode_switch };

inline const char* to_string(InitMode m) {
    return m == InitMode::random ? "random" : "warm_start";
}
inline const char* to_string(GuardKind g) {
    switch (g) {
        case GuardKind::none: return "none";
        case GuardKind::weight_dilution: return "weight_dilution";
        case GuardKind::mode_switch: return "mode_switch";
    }
    return "?";
}

// Everything that defines one optimization method: initialization design,
// weighting strategy, bad-transfer guard, acquisition settings and budget.
// The budget counts every objective evaluation including initialization.
struct MethodSpec {
    std::string id;
    InitMode init_mode = InitMode::random;
    std::size_t n_init = 10;  // 10 random points or 2 warm-start points
    WeightingConfig weighting;
    GuardKind guard = GuardKind::none;
    std::size_t guard_kfolds = 3;  // mode-switch cross-validation folds
    AcquisitionConfig acquisition;
    std::size_t budget = 100;
    GpFitOptions gp_fit;

    bool is_standard_bo() const { return weighting.strategy == WeightStrategy::standard_bo; }

    bool uses_ensemble_weights() const {
        switch (weighting.strategy) {
            case WeightStrategy::lasso:
            case WeightStrategy::ridge:
            case WeightStrategy::rgpe:
            case WeightStrategy::tstr:
            case WeightStrategy::wac:
            case WeightStrategy::target_only:
                return true;
            default:
                return false;
        }
    }

    void validate() const {
        if (id.empty()) throw std::invalid_argument("method needs an id");
        if (n_init < 1) throw std::invalid_argument("method '" + id + "': n_init must be >= 1");
        if (budget < n_init)
            throw std::invalid_argument("method '" + id + "': budget below init count");
        const auto s = weighting.strategy;
        switch (guard) {
            case GuardKind::none:
                break;
            case GuardKind::weight_dilution:
                if (s != WeightStrategy::rgpe && s != WeightStrategy::tstr)
                    throw std::invalid_argument("method '" + id +
                                                "': weight dilution requires rgpe or tstr");
                break;
            case GuardKind::mode_switch:
                if (s != WeightStrategy::lasso && s != WeightStrategy::ridge)
                    throw std::invalid_argument("method '" + id +
                                                "': mode switching requires lasso or ridge");
                break;
        }
        if (is_standard_bo() && guard != GuardKind::none)
            throw std::invalid_argument("method '" + id + "': standard BO takes no guard");
    }
};

struct IterationRecord {
    Configuration config;
    double observed = 0.0;
    double incumbent = 0.0;
    std::vector<double> weights;  // applied weights; empty during initialization
    std::string guard_mode;       // "ensemble" / "target_only"; empty during init
    double wall_time_s = 0.0;     // diagnostic only, not persisted
};

// Full trace of one seeded run. The incumbent column is non-increasing and
// the iteration count equals the budget unless the run aborted.
struct RunRecord {
    std::string method_id;
    std::string task_id;
    std::uint64_t seed = 0;
    std::vector<IterationRecord> iterations;
    bool failed = false;
    std::string error;

    double final_incumbent() const {
        if (iterations.empty()) throw std::logic_error("empty run record");
        return iterations.back().incumbent;
    }
};

namespace detail {

inline Configuration snap_to_grid(const BenchmarkTask& task, const Configuration& x) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_row = 0;
    const auto& rows = *task.grid_inputs;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double d = gower_distance(task.space, x, rows[r]);
        if (d < best) {
            best = d;
            best_row = r;
        }
    }
    return rows[best_row];
}

// Evaluation with optional observation noise keyed by the configuration, so
// a noisy task is still a deterministic surface for a fixed noise seed.
inline double evaluate_task(const BenchmarkTask& task, const Configuration& x,
                            std::uint64_t noise_seed) {
    double y = task.evaluate(x);
    if (task.noise_std > 0.0) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const double v : x.values()) {
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(v));
            std::memcpy(&bits, &v, sizeof(bits));
            h = (h ^ bits) * 0x100000001b3ULL;
        }
        Rng rng(derive_seed(noise_seed, "observation_noise", h));
        y += task.noise_std * rng.normal();
    }
    return y;
}

inline Eigen::VectorXd target_only_weights(Eigen::Index n_models) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n_models);
    w[n_models - 1] = 1.0;
    return w;
}

// Resolves the regularization strength for this iteration: an explicit
// config value wins, cross-validation takes over once six target points
// exist, the pre-learned value covers the early iterations.
inline double resolve_alpha(const PredictionMatrix& pm, const WeightingConfig& cfg,
                            std::optional<double> prelearned, std::uint64_t seed) {
    if (cfg.alpha) return *cfg.alpha;
    if (pm.n_obs() >= 6) return best_alpha_cv(pm.means, pm.y, cfg, seed);
    if (prelearned) return *prelearned;
    throw std::invalid_argument("regression alpha is unresolved and not pre-learned");
}

inline void apply_dilution_mask(Eigen::VectorXd& w, const std::vector<bool>& keep) {
    for (std::size_t i = 0; i < keep.size(); ++i)
        if (!keep[i]) w[static_cast<Eigen::Index>(i)] = 0.0;
    const double total = w.sum();
    if (total > 0.0)
        w /= total;
    else
        w = target_only_weights(w.size());
}

}  // namespace detail

// Runs the full transfer-learning BO loop (or plain BO) for one seeded
// (method, task) pair. Every stochastic component draws from a named
// sub-stream of the run seed, so records replay exactly.
inline RunRecord run_bo(const MethodSpec& method, const BenchmarkTask& task,
                        const std::vector<ObservationDataset>& historic,
                        std::uint64_t seed) {
    method.validate();
    const bool needs_sources =
        method.uses_ensemble_weights() || method.init_mode == InitMode::warm_start;
    if (needs_sources && historic.empty())
        throw std::invalid_argument("method '" + method.id + "' needs historic datasets");
    for (const auto& h : historic)
        if (h.empty()) throw std::invalid_argument("historic dataset is empty");

    RunRecord record;
    record.method_id = method.id;
    record.task_id = task.id;
    record.seed = seed;

    const auto t_run0 = std::chrono::steady_clock::now();
    try {
        const SearchSpace& space = task.space;
        const bool wac = method.weighting.strategy == WeightStrategy::wac;

        // Source models exist for TL weighting and for warm-start scoring.
        std::optional<EnsembleModel> source_ens;
        if (needs_sources)
            source_ens = construct_ensemble(space, historic, derive_seed(seed, "ensemble"),
                                            method.gp_fit);

        // Pre-learned regularization strength for the regression strategies.
        std::optional<double> prelearned_alpha;
        if ((method.weighting.strategy == WeightStrategy::lasso ||
             method.weighting.strategy == WeightStrategy::ridge) &&
            !method.weighting.alpha && historic.size() >= 2)
            prelearned_alpha = prelearn_alpha(space, historic, method.weighting,
                                              derive_seed(seed, "prelearn"), method.gp_fit);

        // Initialization design.
        std::vector<Configuration> init_points;
        if (method.init_mode == InitMode::random) {
            init_points = random_init(space, method.n_init, derive_seed(seed, "init"));
        } else {
            std::vector<Configuration> candidates;
            for (const auto& h : historic)
                for (const auto& x : h.inputs) candidates.push_back(x);
            init_points = warm_start(*source_ens, candidates, method.n_init);
        }

        ObservationDataset data;
        data.task_id = task.id;
        std::vector<Configuration> evaluated;
        double incumbent = std::numeric_limits<double>::infinity();
        const auto observe = [&](Configuration x, const std::vector<double>& weights,
                                 const std::string& guard_mode,
                                 std::chrono::steady_clock::time_point t0) {
            if (task.is_grid()) x = detail::snap_to_grid(task, x);
            const double y = detail::evaluate_task(task, x, derive_seed(seed, "noise"));
            incumbent = std::min(incumbent, y);
            data.append(x, y);
            evaluated.push_back(x);
            IterationRecord it;
            it.config = std::move(x);
            it.observed = y;
            it.incumbent = incumbent;
            it.weights = weights;
            it.guard_mode = guard_mode;
            it.wall_time_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            record.iterations.push_back(std::move(it));
        };

        auto t_iter = t_run0;
        for (const auto& x : init_points) {
            observe(x, {}, "", t_iter);
            t_iter = std::chrono::steady_clock::now();
        }

        // The BO loop shares one model container for both paths: plain BO is
        // an ensemble with no sources and unit weight on the target GP.
        EnsembleModel loop_ens =
            method.uses_ensemble_weights()
                ? EnsembleModel(space, source_ens->sources(),
                                wac ? VarianceMode::weighted : VarianceMode::target_only)
                : EnsembleModel(space, {});

        GuardState guard_state(derive_seed(seed, "guard"));

        while (data.size() < method.budget) {
            const auto t0 = std::chrono::steady_clock::now();
            const std::size_t eval_count = data.size();
            loop_ens = update_ensemble(loop_ens, data,
                                       derive_seed(seed, "target_fit", eval_count),
                                       method.gp_fit);
            const auto n_models = static_cast<Eigen::Index>(loop_ens.n_models());
            const std::uint64_t weights_seed = derive_seed(seed, "weights", eval_count);

            Eigen::VectorXd w;
            std::string guard_mode = method.uses_ensemble_weights() ? "ensemble" : "target_only";
            switch (method.weighting.strategy) {
                case WeightStrategy::standard_bo:
                    w = Eigen::VectorXd::Ones(1);
                    break;
                case WeightStrategy::target_only:
                    w = detail::target_only_weights(n_models);
                    guard_mode = "target_only";
                    break;
                case WeightStrategy::rgpe:
                case WeightStrategy::tstr: {
                    const auto pm = build_prediction_matrix(loop_ens, data, true);
                    const bool rankable = pm.n_obs() >= 3;
                    if (method.weighting.strategy == WeightStrategy::rgpe) {
                        if (!rankable) {
                            w = Eigen::VectorXd::Constant(n_models, 1.0 / double(n_models));
                        } else if (method.guard == GuardKind::weight_dilution) {
                            const auto losses = rank_bootstrap_losses(
                                pm, method.weighting.bootstrap_samples, weights_seed);
                            w = rgpe_weights_from_losses(losses);
                            detail::apply_dilution_mask(
                                w, weight_dilution_mask(losses, eval_count + 1, method.budget,
                                                        derive_seed(seed, "dilution", eval_count)));
                        } else {
                            w = rgpe_weights(pm, method.weighting, weights_seed);
                        }
                    } else {
                        w = pm.n_obs() >= 2 ? tstr_weights(pm, method.weighting)
                                            : detail::target_only_weights(n_models);
                        if (method.guard == GuardKind::weight_dilution && rankable) {
                            const auto losses = rank_bootstrap_losses(
                                pm, method.weighting.bootstrap_samples, weights_seed);
                            detail::apply_dilution_mask(
                                w, weight_dilution_mask(losses, eval_count + 1, method.budget,
                                                        derive_seed(seed, "dilution", eval_count)));
                        }
                    }
                    break;
                }
                case WeightStrategy::lasso:
                case WeightStrategy::ridge: {
                    if (data.size() < 2) {
                        w = detail::target_only_weights(n_models);
                        break;
                    }
                    const auto pm = build_prediction_matrix(loop_ens, data, false);
                    WeightingConfig cfg = method.weighting;
                    cfg.alpha = detail::resolve_alpha(pm, cfg, prelearned_alpha,
                                                      derive_seed(seed, "alpha_cv", eval_count));
                    if (method.guard == GuardKind::mode_switch) {
                        // Track the cross-validated MSE of the hypothesis space
                        // currently in use, then decide whether to flip.
                        const double alpha = *cfg.alpha;
                        const auto fold_fit =
                            guard_state.mode == GuardMode::ensemble
                                ? std::function<Eigen::VectorXd(const PredictionMatrix&)>(
                                      [&](const PredictionMatrix& fold) {
                                          return detail::coordinate_descent(
                                              fold.means, fold.y, alpha,
                                              cfg.strategy == WeightStrategy::lasso,
                                              cfg.positive_constraint);
                                      })
                                : std::function<Eigen::VectorXd(const PredictionMatrix&)>(
                                      [&](const PredictionMatrix& fold) {
                                          return detail::target_only_weights(fold.means.cols());
                                      });
                        if (const auto mse = kfold_mse(pm, fold_fit, method.guard_kfolds))
                            guard_state.mse_history.push_back(*mse);
                        maybe_switch_mode(guard_state);
                    }
                    if (method.guard == GuardKind::mode_switch &&
                        guard_state.mode == GuardMode::target_only) {
                        w = detail::target_only_weights(n_models);
                        guard_mode = "target_only";
                    } else {
                        w = regression_weights(pm, cfg, weights_seed);
                    }
                    break;
                }
                case WeightStrategy::wac: {
                    if (data.size() < 2) {
                        w = detail::target_only_weights(n_models);
                        break;
                    }
                    const auto pm = build_prediction_matrix(loop_ens, data, false);
                    w = wac_weights(pm, method.weighting, weights_seed);
                    break;
                }
            }
            loop_ens.set_weights(w);

            const std::vector<Configuration> no_exclusions;
            const auto& exclude = task.is_grid() ? evaluated : no_exclusions;
            Configuration next = optimize_acquisition(
                loop_ens, space, method.acquisition, exclude,
                derive_seed(seed, "acq", eval_count),
                task.is_grid() ? task.grid_inputs.get() : nullptr);

            observe(std::move(next), std::vector<double>(w.data(), w.data() + w.size()),
                    guard_mode, t0);
            guard_state.incumbent_history.push_back(incumbent);
        }
    } catch (const std::exception& e) {
        record.failed = true;
        record.error = e.what();
    }
    return record;
}

// Historic datasets for a task family: one full standard-BO trace per
// (task, seed), keeping every evaluated pair.
inline std::vector<ObservationDataset> generate_historic(
    const std::vector<BenchmarkTask>& tasks, std::size_t n_evals,
    const std::vector<std::uint64_t>& seeds, const MethodSpec* base_method = nullptr) {
    MethodSpec method;
    if (base_method) method = *base_method;
    method.id = "historic_standard_bo";
    method.init_mode = InitMode::random;
    method.weighting.strategy = WeightStrategy::standard_bo;
    method.guard = GuardKind::none;
    method.budget = n_evals;
    if (method.n_init > n_evals) throw std::invalid_argument("n_evals below init count");
    if (seeds.empty()) throw std::invalid_argument("need at least one historic seed");

    std::vector<ObservationDataset> out;
    out.reserve(tasks.size() * seeds.size());
    for (const auto& task : tasks) {
        for (const auto s : seeds) {
            const auto record = run_bo(method, task, {}, derive_seed(s, "historic:" + task.id));
            if (record.failed)
                throw std::runtime_error("historic generation failed for task '" + task.id +
                                         "': " + record.error);
            ObservationDataset d;
            d.task_id = task.id;
            for (const auto& it : record.iterations) d.append(it.config, it.observed);
            out.push_back(std::move(d));
        }
    }
    return out;
}

// Deterministic seed of one (method, task, seed) cell.
inline std::uint64_t run_seed(std::uint64_t seed, const std::string& method_id,
                              const std::string& task_id) {
    return derive_seed(seed, "run:" + method_id + ":" + task_id);
}

inline std::vector<std::uint64_t> default_protocol_seeds(std::size_t n = 15) {
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t i = 0; i < n; ++i) seeds[i] = i + 1;
    return seeds;
}

// Leave-one-task-out protocol: every task acts as target once per seed,
// with all other tasks' datasets as sources.
inline std::vector<RunRecord> leave_one_task_out(const std::vector<BenchmarkTask>& family,
                                                 const std::vector<ObservationDataset>& historic,
                                                 const MethodSpec& method,
                                                 const std::vector<std::uint64_t>& seeds =
                                                     default_protocol_seeds()) {
    if (family.size() < 2) throw std::invalid_argument("leave-one-task-out needs >= 2 tasks");
    std::vector<RunRecord> records;
    records.reserve(family.size() * seeds.size());
    for (const auto& task : family) {
        std::vector<ObservationDataset> sources;
        for (const auto& h : historic)
            if (h.task_id != task.id) sources.push_back(h);
        for (const auto s : seeds)
            records.push_back(run_bo(method, task, sources, run_seed(s, method.id, task.id)));
    }
    return records;
}

}  // namespace tlbo
