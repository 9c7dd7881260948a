#pragma once

#include <algorithm>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "tlbo/benchmarks/task.hpp"
#include "tlbo/table_io.hpp"

namespace tlbo {

// Wraps one pre-evaluated configuration table as a task: arbitrary queries
// resolve to the objective of the Gower-nearest row (earliest row wins
// ties), and the attainable range is the objective column's min/max.
inline BenchmarkTask make_grid_task(std::string id, const SearchSpace& space,
                                    ConfigTable table) {
    if (table.inputs.empty()) throw std::invalid_argument("grid task has no rows");
    auto rows = std::make_shared<const std::vector<Configuration>>(std::move(table.inputs));
    auto objectives = std::make_shared<const std::vector<double>>(std::move(table.objectives));

    BenchmarkTask task;
    task.id = std::move(id);
    task.space = space;
    task.grid_inputs = rows;
    task.known_range = {*std::min_element(objectives->begin(), objectives->end()),
                        *std::max_element(objectives->begin(), objectives->end())};
    task.evaluator = [space, rows, objectives](const Configuration& query) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_row = 0;
        for (std::size_t r = 0; r < rows->size(); ++r) {
            const double d = gower_distance(space, query, (*rows)[r]);
            if (d < best) {
                best = d;
                best_row = r;
            }
        }
        return (*objectives)[best_row];
    };
    return task;
}

inline std::vector<BenchmarkTask> load_grid_tasks(const std::vector<std::string>& paths,
                                                  const SearchSpace& space) {
    std::vector<BenchmarkTask> tasks;
    tasks.reserve(paths.size());
    for (const auto& path : paths) {
        auto table = read_config_table_file(path, space);
        std::string id = path;
        const auto slash = id.find_last_of('/');
        if (slash != std::string::npos) id = id.substr(slash + 1);
        const auto dot = id.find_last_of('.');
        if (dot != std::string::npos) id = id.substr(0, dot);
        tasks.push_back(make_grid_task(std::move(id), space, std::move(table)));
    }
    return tasks;
}

}  // namespace tlbo
