#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tlbo/ensemble.hpp"
#include "tlbo/rng.hpp"

namespace tlbo {

// Weighting strategies for the model ensemble. lasso/ridge are the
// regularized-regression family (optionally positivity-constrained), rgpe
// ranks by bootstrapped discordant pairs, tstr maps ranking distance through
// an Epanechnikov kernel, wac runs SGD on MSE+L2 and switches the ensemble
// to weighted predictive variance. target_only pins all weight on the
// target model; standard_bo bypasses the ensemble entirely.
enum class WeightStrategy { lasso, ridge, rgpe, tstr, wac, target_only, standard_bo };

inline const char* to_string(WeightStrategy s) {
    switch (s) {
        case WeightStrategy::lasso: return "lasso";
        case WeightStrategy::ridge: return "ridge";
        case WeightStrategy::rgpe: return "rgpe";
        case WeightStrategy::tstr: return "tstr";
        case WeightStrategy::wac: return "wac";
        case WeightStrategy::target_only: return "target_only";
        case WeightStrategy::standard_bo: return "standard_bo";
    }
    return "?";
}

struct SgdConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 500;
    double l2_penalty = 0.01;
    double validation_fraction = 0.2;
};

struct WeightingConfig {
    WeightStrategy strategy = WeightStrategy::standard_bo;
    bool positive_constraint = false;   // lasso/ridge only
    std::optional<double> alpha;        // regularization strength; pre-learned if absent
    double bandwidth_rho = 0.1;
    std::size_t bootstrap_samples = 1000;
    SgdConfig sgd;
};

// Model mean predictions at the target observations: one row per target
// point, one column per model (sources first, target model last), plus the
// observed target outputs. target_loo carries the target model's
// leave-one-out means for the strategies that score the target against the
// sources (in-sample means would let the target interpolate and win every
// comparison).
struct PredictionMatrix {
    Eigen::MatrixXd means;       // M x (N+1)
    Eigen::VectorXd y;           // M
    Eigen::VectorXd target_loo;  // M, may be empty when unused

    Eigen::Index n_obs() const { return y.size(); }
    Eigen::Index n_models() const { return means.cols(); }
};

inline PredictionMatrix build_prediction_matrix(const EnsembleModel& ens,
                                                const ObservationDataset& target_data,
                                                bool with_target_loo) {
    const auto m = static_cast<Eigen::Index>(target_data.size());
    const auto n_models = static_cast<Eigen::Index>(ens.n_models());
    PredictionMatrix pm;
    pm.means.resize(m, n_models);
    pm.y.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto& x = target_data.inputs[static_cast<std::size_t>(j)];
        const Eigen::VectorXd xe = encode(ens.space(), x);
        for (std::size_t i = 0; i < ens.n_sources(); ++i)
            pm.means(j, static_cast<Eigen::Index>(i)) =
                ens.source(i).posterior_encoded(xe).first;
        pm.means(j, n_models - 1) = ens.target().posterior_encoded(xe).first;
        pm.y[j] = target_data.outputs[static_cast<std::size_t>(j)];
    }
    if (with_target_loo) pm.target_loo = ens.target().loo_means();
    return pm;
}

// Number of mis-ranked ordered pairs between a prediction vector and the
// true outputs.
inline std::size_t discordant_pairs(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
    if (pred.size() != y.size()) throw std::invalid_argument("length mismatch");
    const Eigen::Index m = pred.size();
    std::size_t count = 0;
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index k = 0; k < m; ++k)
            if ((pred[j] < pred[k]) != (y[j] < y[k])) ++count;
    return count;
}

// Bootstrap resample of row indices, size m with replacement. Sample s of a
// named stream is reproducible in isolation, so bootstrap loops can fan out.
inline std::vector<Eigen::Index> bootstrap_indices(std::uint64_t seed, std::string_view stream,
                                                   std::size_t sample, Eigen::Index m) {
    Rng rng = derive_stream(seed, stream, sample);
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
    for (auto& i : idx) i = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(m)));
    return idx;
}

namespace detail {

// Cyclic coordinate descent for (1/M)||y - Xw||^2 + penalty, with optional
// projection onto w >= 0. Exact for this separable objective.
inline Eigen::VectorXd coordinate_descent(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                          double alpha, bool l1, bool positive) {
    const Eigen::Index m = x.rows(), n = x.cols();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd resid = y;
    Eigen::VectorXd col_sq(n);
    for (Eigen::Index i = 0; i < n; ++i) col_sq[i] = x.col(i).squaredNorm() / double(m);

    for (int sweep = 0; sweep < 10000; ++sweep) {
        double max_delta = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (col_sq[i] == 0.0) continue;
            const double rho = x.col(i).dot(resid) / double(m) + col_sq[i] * w[i];
            double wi;
            if (l1) {
                const double thr = alpha / 2.0;
                if (positive)
                    wi = std::max(0.0, (rho - thr) / col_sq[i]);
                else if (rho > thr)
                    wi = (rho - thr) / col_sq[i];
                else if (rho < -thr)
                    wi = (rho + thr) / col_sq[i];
                else
                    wi = 0.0;
            } else {
                wi = rho / (col_sq[i] + alpha);
                if (positive) wi = std::max(0.0, wi);
            }
            const double delta = wi - w[i];
            if (delta != 0.0) {
                resid -= delta * x.col(i);
                w[i] = wi;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        if (max_delta < 1e-12 * std::max(1.0, w.cwiseAbs().maxCoeff())) break;
    }
    return w;
}

inline Eigen::MatrixXd rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
    return out;
}

inline Eigen::VectorXd entries(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty list");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Lasso/Ridge ensemble weights: coordinate descent on the penalized mean
// squared error, averaged over bootstrap resamples of the target rows
// (bootstrap_samples = 0 fits the plain dataset once).
inline Eigen::VectorXd regression_weights(const PredictionMatrix& pm,
                                          const WeightingConfig& cfg, std::uint64_t seed) {
    if (cfg.strategy != WeightStrategy::lasso && cfg.strategy != WeightStrategy::ridge)
        throw std::invalid_argument("regression_weights needs lasso or ridge strategy");
    if (!cfg.alpha)
        throw std::invalid_argument("regression alpha is unresolved");
    if (pm.n_obs() < 2) throw std::invalid_argument("need at least 2 target observations");
    const bool l1 = cfg.strategy == WeightStrategy::lasso;

    if (cfg.bootstrap_samples == 0)
        return detail::coordinate_descent(pm.means, pm.y, *cfg.alpha, l1, cfg.positive_constraint);

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(pm.n_models());
    for (std::size_t s = 0; s < cfg.bootstrap_samples; ++s) {
        const auto idx = bootstrap_indices(seed, "regression_bootstrap", s, pm.n_obs());
        acc += detail::coordinate_descent(detail::rows(pm.means, idx), detail::entries(pm.y, idx),
                                          *cfg.alpha, l1, cfg.positive_constraint);
    }
    return acc / double(cfg.bootstrap_samples);
}

// Grid used when cross-validating the regularization strength.
inline std::vector<double> alpha_grid() {
    std::vector<double> grid(20);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = double(i) / double(grid.size() - 1);
        grid[i] = std::pow(10.0, -4.0 + 6.0 * t);
    }
    return grid;
}

// K-fold cross-validated choice of alpha over the log grid; ties go to the
// smaller alpha. Folds need >= 2 points each.
inline double best_alpha_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const WeightingConfig& cfg, std::uint64_t seed,
                            std::size_t k_folds = 3) {
    const Eigen::Index m = x.rows();
    if (m < static_cast<Eigen::Index>(2 * k_folds))
        throw std::invalid_argument("too few points for alpha cross-validation");
    const bool l1 = cfg.strategy == WeightStrategy::lasso;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
    Rng rng = derive_stream(seed, "alpha_cv_folds");
    rng.shuffle(order);

    double best_alpha = 0.0;
    double best_err = std::numeric_limits<double>::infinity();
    for (const double alpha : alpha_grid()) {
        double err = 0.0;
        for (std::size_t f = 0; f < k_folds; ++f) {
            std::vector<Eigen::Index> train, test;
            for (std::size_t i = 0; i < order.size(); ++i)
                (i % k_folds == f ? test : train).push_back(order[i]);
            const Eigen::VectorXd w = detail::coordinate_descent(
                detail::rows(x, train), detail::entries(y, train), alpha, l1,
                cfg.positive_constraint);
            const Eigen::VectorXd pred = detail::rows(x, test) * w;
            err += (pred - detail::entries(y, test)).squaredNorm() / double(test.size());
        }
        err /= double(k_folds);
        if (err < best_err) {
            best_err = err;
            best_alpha = alpha;
        }
    }
    return best_alpha;
}

// Pre-learns the regularization strength from the historic datasets before
// any target data exists: each task in turn acts as pseudo-target, scored
// against GPs trained on the remaining tasks, and the per-task best alphas
// are reduced by their median.
inline double prelearn_alpha(const SearchSpace& space,
                             const std::vector<ObservationDataset>& historic,
                             const WeightingConfig& cfg, std::uint64_t seed,
                             const GpFitOptions& fit_opt = {}) {
    if (historic.size() < 2)
        throw std::invalid_argument("alpha pre-learning needs at least 2 historic datasets");

    std::vector<GpSurrogate> models;
    models.reserve(historic.size());
    for (std::size_t i = 0; i < historic.size(); ++i)
        models.push_back(fit_gp(space, historic[i], derive_seed(seed, "prelearn_fit", i), fit_opt));

    std::vector<double> alphas;
    for (std::size_t t = 0; t < historic.size(); ++t) {
        const auto& target = historic[t];
        const auto m = static_cast<Eigen::Index>(target.size());
        Eigen::MatrixXd x(m, static_cast<Eigen::Index>(historic.size() - 1));
        Eigen::VectorXd y(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            const Eigen::VectorXd xe = encode(space, target.inputs[static_cast<std::size_t>(j)]);
            Eigen::Index col = 0;
            for (std::size_t i = 0; i < historic.size(); ++i) {
                if (i == t) continue;
                x(j, col++) = models[i].posterior_encoded(xe).first;
            }
            y[j] = target.outputs[static_cast<std::size_t>(j)];
        }
        alphas.push_back(best_alpha_cv(x, y, cfg, derive_seed(seed, "prelearn_cv", t)));
    }
    return detail::median(std::move(alphas));
}

// Per-model, per-sample discordant-pair losses over shared bootstrap
// resamples. The target model is scored with its leave-one-out means. Used
// by both the RGPE weights and the weight-dilution guard.
inline Eigen::MatrixXd rank_bootstrap_losses(const PredictionMatrix& pm,
                                             std::size_t n_samples, std::uint64_t seed) {
    if (pm.target_loo.size() != pm.n_obs())
        throw std::invalid_argument("rank losses need leave-one-out target predictions");
    const Eigen::Index n_models = pm.n_models();
    Eigen::MatrixXd losses(n_models, static_cast<Eigen::Index>(n_samples));
    for (std::size_t s = 0; s < n_samples; ++s) {
        const auto idx = bootstrap_indices(seed, "rgpe_bootstrap", s, pm.n_obs());
        const Eigen::VectorXd ys = detail::entries(pm.y, idx);
        for (Eigen::Index i = 0; i < n_models; ++i) {
            const Eigen::VectorXd pred = i + 1 == n_models
                                             ? detail::entries(pm.target_loo, idx)
                                             : detail::entries(pm.means.col(i), idx);
            losses(i, static_cast<Eigen::Index>(s)) = double(discordant_pairs(pred, ys));
        }
    }
    return losses;
}

// RGPE: each bootstrap sample votes 1/|argmin| for every model in its
// minimum-loss set; weights are the vote averages. Below 3 observations the
// ranking is meaningless and all models share weight uniformly.
inline Eigen::VectorXd rgpe_weights_from_losses(const Eigen::MatrixXd& losses) {
    const Eigen::Index n_models = losses.rows(), s_count = losses.cols();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n_models);
    for (Eigen::Index s = 0; s < s_count; ++s) {
        const double min_loss = losses.col(s).minCoeff();
        std::vector<Eigen::Index> argmin;
        for (Eigen::Index i = 0; i < n_models; ++i)
            if (losses(i, s) == min_loss) argmin.push_back(i);
        for (const Eigen::Index i : argmin) w[i] += 1.0 / double(argmin.size());
    }
    return w / double(s_count);
}

inline Eigen::VectorXd rgpe_weights(const PredictionMatrix& pm, const WeightingConfig& cfg,
                                    std::uint64_t seed) {
    if (pm.n_obs() < 3)
        return Eigen::VectorXd::Constant(pm.n_models(), 1.0 / double(pm.n_models()));
    return rgpe_weights_from_losses(rank_bootstrap_losses(pm, cfg.bootstrap_samples, seed));
}

// Epanechnikov quadratic kernel of the ranking distance.
inline double epanechnikov(double r) {
    return r <= 1.0 ? 0.75 * (1.0 - r * r) : 0.0;
}

// TSTR: distance per model is the discordant fraction of ordered pairs in
// [0,1]; weights are the normalized kernel values. If every model is
// outside the bandwidth, all weight falls back to the target model.
inline Eigen::VectorXd tstr_weights(const PredictionMatrix& pm, const WeightingConfig& cfg) {
    const Eigen::Index m = pm.n_obs();
    if (m < 2) throw std::invalid_argument("tstr needs at least 2 target observations");
    if (pm.target_loo.size() != m)
        throw std::invalid_argument("tstr needs leave-one-out target predictions");
    const Eigen::Index n_models = pm.n_models();
    const double pairs = double(m) * double(m - 1);
    Eigen::VectorXd w(n_models);
    for (Eigen::Index i = 0; i < n_models; ++i) {
        const Eigen::VectorXd pred =
            i + 1 == n_models ? pm.target_loo : Eigen::VectorXd(pm.means.col(i));
        const double r = double(discordant_pairs(pred, pm.y)) / pairs;
        w[i] = epanechnikov(r / cfg.bandwidth_rho);
    }
    const double total = w.sum();
    if (total == 0.0) {
        w.setZero();
        w[n_models - 1] = 1.0;
        return w;
    }
    return w / total;
}

// WAC: SGD on MSE + L2 with a train/validation split for early stopping;
// the best iterate by validation error (training objective when the split
// is disabled) is returned. Diverging runs restart with a halved rate.
inline Eigen::VectorXd wac_weights(const PredictionMatrix& pm, const WeightingConfig& cfg,
                                   std::uint64_t seed) {
    const Eigen::Index m = pm.n_obs();
    if (m < 2) throw std::invalid_argument("wac needs at least 2 target observations");
    const Eigen::Index n_models = pm.n_models();
    const auto& sgd = cfg.sgd;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
    Rng split_rng = derive_stream(seed, "wac_split");
    split_rng.shuffle(order);
    const auto n_val = static_cast<std::size_t>(std::floor(double(m) * sgd.validation_fraction));
    std::vector<Eigen::Index> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<Eigen::Index> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    if (train.empty()) {
        train = order;
        val.clear();
    }

    const auto objective = [&](const Eigen::VectorXd& w,
                               const std::vector<Eigen::Index>& idx) {
        double sse = 0.0;
        for (const Eigen::Index j : idx) {
            const double r = pm.y[j] - pm.means.row(j).dot(w);
            sse += r * r;
        }
        return sse / double(idx.size());
    };

    double lr = sgd.learning_rate;
    for (int attempt = 0; attempt <= 3; ++attempt) {
        Rng rng = derive_stream(seed, "wac_sgd", static_cast<std::uint64_t>(attempt));
        Eigen::VectorXd w = Eigen::VectorXd::Zero(n_models);
        Eigen::VectorXd best_w = w;
        double best_score = std::numeric_limits<double>::infinity();
        bool diverged = false;
        std::size_t stall = 0;
        auto shuffled = train;
        for (std::size_t epoch = 0; epoch < sgd.epochs && !diverged; ++epoch) {
            rng.shuffle(shuffled);
            for (const Eigen::Index j : shuffled) {
                const double err = pm.means.row(j).dot(w) - pm.y[j];
                w -= lr * (2.0 * err * pm.means.row(j).transpose() + 2.0 * sgd.l2_penalty * w);
            }
            const double score = objective(w, val.empty() ? train : val) +
                                 (val.empty() ? sgd.l2_penalty * w.squaredNorm() : 0.0);
            if (!std::isfinite(score)) {
                diverged = true;
                break;
            }
            if (score < best_score - 1e-15) {
                best_score = score;
                best_w = w;
                stall = 0;
            } else if (++stall >= 50) {
                break;
            }
        }
        if (!diverged) return best_w;
        lr *= 0.5;
    }
    throw std::runtime_error("wac SGD diverged after 3 learning-rate restarts");
}

}  // namespace tlbo
