#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tlbo/search_space.hpp"

namespace tlbo {

// An evaluable optimization task. The evaluator is a pure function of the
// configuration; observation noise, when wanted, is added by the run loop
// from its own seeded stream. Grid-backed tasks expose their finite row set
// so acquisition can enumerate it and exclude evaluated rows.
struct BenchmarkTask {
    std::string id;
    SearchSpace space;
    std::function<double(const Configuration&)> evaluator;
    std::optional<std::pair<double, double>> known_range;  // (min, max) attainable
    std::shared_ptr<const std::vector<Configuration>> grid_inputs;
    double noise_std = 0.0;

    double evaluate(const Configuration& x) const { return evaluator(x); }
    bool is_grid() const { return grid_inputs != nullptr; }
};

}  // namespace tlbo
