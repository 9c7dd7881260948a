#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tlbo/surrogate.hpp"

namespace tlbo {

// How the ensemble's predictive variance is formed: from the target GP
// alone (all strategies except WAC) or as the weighted combination of all
// model variances (WAC).
enum class VarianceMode { target_only, weighted };

// Source GPs plus an optional target GP with a weight vector over the
// models present, ordered sources first, target last. Replaced, never
// mutated, when the target model is refitted.
class EnsembleModel {
public:
    EnsembleModel(SearchSpace space,
                  std::vector<std::shared_ptr<const GpSurrogate>> sources,
                  VarianceMode mode = VarianceMode::target_only)
        : space_(std::move(space)), sources_(std::move(sources)), variance_mode_(mode) {}

    const SearchSpace& space() const { return space_; }
    std::size_t n_sources() const { return sources_.size(); }
    std::size_t n_models() const { return sources_.size() + (target_ ? 1 : 0); }
    bool has_target() const { return target_ != nullptr; }
    bool has_weights() const { return weights_.size() > 0; }

    const GpSurrogate& source(std::size_t i) const { return *sources_[i]; }
    const std::vector<std::shared_ptr<const GpSurrogate>>& sources() const { return sources_; }
    const GpSurrogate& target() const {
        if (!target_) throw std::logic_error("ensemble has no target model");
        return *target_;
    }

    VarianceMode variance_mode() const { return variance_mode_; }
    void set_variance_mode(VarianceMode m) { variance_mode_ = m; }

    const Eigen::VectorXd& weights() const {
        if (!has_weights()) throw std::logic_error("ensemble weights are unset");
        return weights_;
    }

    void set_weights(const Eigen::VectorXd& w) {
        if (w.size() != static_cast<Eigen::Index>(n_models()))
            throw std::invalid_argument("weight vector length must match model count");
        weights_ = w;
    }

    void set_target(std::shared_ptr<const GpSurrogate> target) {
        target_ = std::move(target);
        weights_.resize(0);  // stale weights must not survive a model change
    }

    // Weighted predictive distribution at x. Mean is the weighted sum of
    // model means; variance comes from the target GP alone unless the
    // weighted mode is active.
    std::pair<double, double> predict(const Configuration& x) const {
        return predict_encoded(encode(space_, x));
    }

    std::pair<double, double> predict_encoded(const Eigen::VectorXd& xe) const {
        if (!target_) throw std::logic_error("ensemble has no target model");
        if (!has_weights()) throw std::logic_error("ensemble weights are unset");
        double mean = 0.0;
        double var_weighted = 0.0;
        double var_target = 0.0;
        const bool need_all_vars = variance_mode_ == VarianceMode::weighted;
        for (std::size_t i = 0; i < sources_.size(); ++i) {
            const double w = weights_[static_cast<Eigen::Index>(i)];
            if (w == 0.0 && !need_all_vars) continue;
            const auto [mu, var] = sources_[i]->posterior_encoded(xe);
            mean += w * mu;
            if (need_all_vars) var_weighted += w * var;
        }
        const double w_target = weights_[weights_.size() - 1];
        const auto [mu_t, var_t] = target_->posterior_encoded(xe);
        mean += w_target * mu_t;
        var_target = var_t;
        if (need_all_vars) var_weighted += w_target * var_t;
        const double var =
            need_all_vars ? std::max(0.0, var_weighted) : var_target;
        return {mean, var};
    }

private:
    SearchSpace space_;
    std::vector<std::shared_ptr<const GpSurrogate>> sources_;
    std::shared_ptr<const GpSurrogate> target_;
    Eigen::VectorXd weights_;
    VarianceMode variance_mode_ = VarianceMode::target_only;
};

// Fits one GP per historic dataset. The target model is absent and weights
// are unset until the first update.
inline EnsembleModel construct_ensemble(const SearchSpace& space,
                                        const std::vector<ObservationDataset>& historic,
                                        std::uint64_t seed,
                                        const GpFitOptions& opt = {}) {
    if (historic.empty())
        throw std::invalid_argument("ensemble needs at least one historic dataset");
    std::vector<std::shared_ptr<const GpSurrogate>> sources;
    sources.reserve(historic.size());
    for (std::size_t i = 0; i < historic.size(); ++i) {
        try {
            sources.push_back(std::make_shared<const GpSurrogate>(
                fit_gp(space, historic[i], derive_seed(seed, "source_fit", i), opt)));
        } catch (const std::exception& e) {
            throw std::runtime_error("source task " + std::to_string(i) + ": " + e.what());
        }
    }
    return EnsembleModel(space, std::move(sources));
}

// Discards any previous target model and fits a fresh GP on the target
// data. Source models are shared with the input ensemble, never refitted.
inline EnsembleModel update_ensemble(const EnsembleModel& ens,
                                     const ObservationDataset& target_data,
                                     std::uint64_t seed,
                                     const GpFitOptions& opt = {}) {
    if (target_data.empty())
        throw std::invalid_argument("target dataset is empty");
    EnsembleModel out(ens.space(), ens.sources(), ens.variance_mode());
    out.set_target(std::make_shared<const GpSurrogate>(
        fit_gp(ens.space(), target_data, seed, opt)));
    return out;
}

}  // namespace tlbo
