#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tlbo/search_space.hpp"

namespace tlbo {

// One task's (input, output) pairs: a historic dataset or the growing
// target dataset of a run.
struct ObservationDataset {
    std::string task_id;
    std::vector<Configuration> inputs;
    std::vector<double> outputs;

    std::size_t size() const { return inputs.size(); }
    bool empty() const { return inputs.empty(); }

    void append(Configuration x, double y) {
        inputs.push_back(std::move(x));
        outputs.push_back(y);
    }

    double min_output() const {
        if (empty()) throw std::invalid_argument("dataset is empty");
        double best = outputs[0];
        for (double y : outputs) best = std::min(best, y);
        return best;
    }
};

}  // namespace tlbo
