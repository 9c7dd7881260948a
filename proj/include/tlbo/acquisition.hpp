#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tlbo/ensemble.hpp"
#include "tlbo/rng.hpp"
#include "tlbo/search_space.hpp"

namespace tlbo {

struct AcquisitionConfig {
    double beta = 2.0;
    std::size_t n_random_candidates = 2000;
    std::size_t n_local_steps = 20;
    std::size_t local_neighbors = 10;
};

// Lower confidence bound for minimization.
inline double lcb(double mean, double variance, double beta) {
    if (variance < 0.0) throw std::invalid_argument("negative variance");
    return mean - beta * std::sqrt(variance);
}

namespace detail {

inline bool is_excluded(const Configuration& c, const std::vector<Configuration>& exclude) {
    return std::find(exclude.begin(), exclude.end(), c) != exclude.end();
}

// Local move around a candidate: jitter numerics by a tenth of their range,
// resample each categorical slot with small probability.
inline Configuration perturb(const SearchSpace& space, const Configuration& base, Rng& rng) {
    std::vector<double> vals(base.values());
    for (std::size_t d = 0; d < space.dim(); ++d) {
        const auto& v = space.variable(d);
        switch (v.kind) {
            case VarKind::continuous:
                vals[d] = std::clamp(vals[d] + rng.normal(0.0, 0.1 * v.range()), v.lower, v.upper);
                break;
            case VarKind::integer: {
                const double step = rng.normal(0.0, std::max(1.0, 0.1 * v.range()));
                vals[d] = std::clamp(std::round(vals[d] + step), v.lower, v.upper);
                break;
            }
            case VarKind::categorical:
                if (rng.uniform() < 0.2)
                    vals[d] = double(rng.uniform_index(v.n_categories()));
                break;
        }
    }
    return Configuration(std::move(vals));
}

}  // namespace detail

// Minimizes the LCB of the ensemble predictive distribution. Candidates are
// Latin-hypercube draws refined by greedy local perturbation, or the fixed
// candidate pool when one is given (grid benchmarks enumerate their rows and
// get no local search). Members of exclude are never returned; ties break
// to the earliest candidate.
inline Configuration optimize_acquisition(const EnsembleModel& ens, const SearchSpace& space,
                                          const AcquisitionConfig& cfg,
                                          const std::vector<Configuration>& exclude,
                                          std::uint64_t seed,
                                          const std::vector<Configuration>* candidate_pool = nullptr) {
    const auto score = [&](const Configuration& c) {
        const auto [mean, var] = ens.predict(c);
        return lcb(mean, var, cfg.beta);
    };

    bool found = false;
    Configuration best;
    double best_value = 0.0;
    const auto consider = [&](const Configuration& c) {
        if (detail::is_excluded(c, exclude)) return;
        const double value = score(c);
        if (!found || value < best_value) {
            found = true;
            best = c;
            best_value = value;
        }
    };

    if (candidate_pool != nullptr) {
        for (const auto& c : *candidate_pool) consider(c);
        if (!found) throw std::runtime_error("all acquisition candidates are excluded");
        return best;
    }

    for (const auto& c : sample_latin_hypercube(space, cfg.n_random_candidates,
                                                derive_seed(seed, "acq_candidates")))
        consider(c);
    if (!found) throw std::runtime_error("all acquisition candidates are excluded");

    Rng local = derive_stream(seed, "acq_local");
    for (std::size_t step = 0; step < cfg.n_local_steps; ++step)
        for (std::size_t k = 0; k < cfg.local_neighbors; ++k)
            consider(detail::perturb(space, best, local));
    return best;
}

}  // namespace tlbo
