#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "tlbo/ensemble.hpp"
#include "tlbo/search_space.hpp"

namespace tlbo {

inline std::vector<Configuration> random_init(const SearchSpace& space, std::size_t n,
                                              std::uint64_t seed) {
    return sample_latin_hypercube(space, n, seed);
}

// Greedy warm-start selection over the union of historic inputs. Round p
// scores each remaining candidate x as the cross-model mean of
// min(mu_q(x), best mu_q among already-selected points) and appends the
// minimizer; posterior means are cached so each mu_q(x) is evaluated once.
inline std::vector<Configuration> warm_start(const EnsembleModel& ens,
                                             const std::vector<Configuration>& candidates,
                                             std::size_t n) {
    const std::size_t n_models = ens.n_sources();
    if (n_models == 0) throw std::invalid_argument("warm start needs at least one source model");
    if (candidates.empty()) throw std::invalid_argument("warm start needs candidates");
    if (n > candidates.size())
        throw std::invalid_argument("cannot select more warm-start points than candidates");

    Eigen::MatrixXd means(static_cast<Eigen::Index>(n_models),
                          static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const Eigen::VectorXd xe = encode(ens.space(), candidates[c]);
        for (std::size_t q = 0; q < n_models; ++q)
            means(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(c)) =
                ens.source(q).posterior_encoded(xe).first;
    }

    Eigen::VectorXd best_per_model = Eigen::VectorXd::Constant(
        static_cast<Eigen::Index>(n_models), std::numeric_limits<double>::infinity());
    std::vector<bool> taken(candidates.size(), false);
    std::vector<Configuration> selected;
    selected.reserve(n);
    for (std::size_t round = 0; round < n; ++round) {
        std::size_t best_c = 0;
        double best_score = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            if (taken[c]) continue;
            const double s =
                best_per_model.cwiseMin(means.col(static_cast<Eigen::Index>(c))).mean();
            if (s < best_score) {
                best_score = s;
                best_c = c;
            }
        }
        taken[best_c] = true;
        selected.push_back(candidates[best_c]);
        best_per_model = best_per_model.cwiseMin(means.col(static_cast<Eigen::Index>(best_c)));
    }
    return selected;
}

}  // namespace tlbo
