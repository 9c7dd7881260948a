#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tlbo/rng.hpp"
#include "tlbo/weighting.hpp"

namespace tlbo {

// Optimization mode for the two-mode switching guard: the full transfer
// ensemble, or the target GP alone.
enum class GuardMode { ensemble, target_only };

struct GuardState {
    explicit GuardState(std::uint64_t seed) : rng(seed) {}

    GuardMode mode = GuardMode::ensemble;
    std::vector<double> mse_history;        // K-fold MSE trace, latest last
    std::vector<double> incumbent_history;  // best-so-far trace, latest last
    Rng rng;
};

// Probability of dropping one source model given the fraction of bootstrap
// samples in which it beat the target model. Reaches 1 as the budget runs
// out regardless of the fraction.
inline double weight_dilution_probability(double beat_fraction, std::size_t t, std::size_t budget) {
    if (budget == 0) throw std::invalid_argument("budget must be positive");
    const double p = 1.0 - (1.0 - double(t) / double(budget)) * beat_fraction;
    return std::clamp(p, 0.0, 1.0);
}

// Independent drop decision per source model from its dilution probability.
// losses is the (n_models x samples) table from rank_bootstrap_losses with
// the target model last; the returned mask has true for kept sources. The
// mask is recomputed from scratch every iteration.
inline std::vector<bool> weight_dilution_mask(const Eigen::MatrixXd& losses, std::size_t t,
                                              std::size_t budget, std::uint64_t seed) {
    const Eigen::Index n_models = losses.rows();
    const Eigen::Index n_samples = losses.cols();
    if (n_models < 2) throw std::invalid_argument("losses must include the target model");
    if (n_samples < 1) throw std::invalid_argument("need at least one bootstrap sample");
    Rng rng = derive_stream(seed, "weight_dilution");
    std::vector<bool> keep(static_cast<std::size_t>(n_models - 1));
    for (Eigen::Index i = 0; i + 1 < n_models; ++i) {
        std::size_t beats = 0;
        for (Eigen::Index s = 0; s < n_samples; ++s)
            if (losses(i, s) < losses(n_models - 1, s)) ++beats;
        const double p_drop =
            weight_dilution_probability(double(beats) / double(n_samples), t, budget);
        keep[static_cast<std::size_t>(i)] = !rng.bernoulli(p_drop);
    }
    return keep;
}

// K-fold cross-validated MSE of the weighted mean prediction: weights are
// refitted on the training folds by the supplied procedure and scored on
// the held-out fold. Inactive (absent) when the data cannot fill K folds
// of at least two points, or K < 2.
inline std::optional<double> kfold_mse(
    const PredictionMatrix& pm,
    const std::function<Eigen::VectorXd(const PredictionMatrix&)>& fit_fold_weights,
    std::size_t k_folds = 3) {
    const Eigen::Index m = pm.n_obs();
    if (k_folds < 2 || m < static_cast<Eigen::Index>(2 * k_folds)) return std::nullopt;

    double total = 0.0;
    for (std::size_t f = 0; f < k_folds; ++f) {
        std::vector<Eigen::Index> train, test;
        for (Eigen::Index i = 0; i < m; ++i)
            (static_cast<std::size_t>(i) % k_folds == f ? test : train).push_back(i);
        PredictionMatrix fold;
        fold.means = detail::rows(pm.means, train);
        fold.y = detail::entries(pm.y, train);
        const Eigen::VectorXd w = fit_fold_weights(fold);
        const Eigen::VectorXd pred = detail::rows(pm.means, test) * w;
        total += (pred - detail::entries(pm.y, test)).squaredNorm() / double(test.size());
    }
    return total / double(k_folds);
}

// Probability of flipping between ensemble and target-only mode: zero while
// the incumbent keeps improving, otherwise the positive relative excess of
// the latest cross-validation MSE over the two-iteration mean.
inline double mode_switch_probability(const GuardState& state) {
    if (state.mse_history.size() < 2 || state.incumbent_history.size() < 2) return 0.0;
    const std::size_t n = state.incumbent_history.size();
    const bool improved = state.incumbent_history[n - 1] < state.incumbent_history[n - 2];
    if (improved) return 0.0;
    const double mse1 = state.mse_history[state.mse_history.size() - 1];
    const double mse2 = state.mse_history[state.mse_history.size() - 2];
    const double mbar = 0.5 * (mse1 + mse2);
    if (mbar == 0.0) return 0.0;
    return std::clamp(std::max(0.0, (mse1 - mbar) / mbar), 0.0, 1.0);
}

// Draws the flip decision and updates the mode. Returns true if the mode
// changed this iteration.
inline bool maybe_switch_mode(GuardState& state) {
    const double p = mode_switch_probability(state);
    if (state.rng.bernoulli(p)) {
        state.mode = state.mode == GuardMode::ensemble ? GuardMode::target_only
                                                       : GuardMode::ensemble;
        return true;
    }
    return false;
}

}  // namespace tlbo
