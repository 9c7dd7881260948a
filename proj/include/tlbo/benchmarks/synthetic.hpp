#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "tlbo/benchmarks/task.hpp"
#include "tlbo/rng.hpp"

namespace tlbo {

enum class SyntheticKind { shifted_quadratic, shifted_branin };

struct SyntheticFamily {
    std::vector<BenchmarkTask> tasks;
    std::vector<std::vector<double>> shifts;  // per task, per dimension
};

namespace synthetic_detail {

inline double branin(double x1, double x2) {
    constexpr double a = 1.0;
    const double b = 5.1 / (4.0 * std::numbers::pi * std::numbers::pi);
    const double c = 5.0 / std::numbers::pi;
    constexpr double r = 6.0;
    constexpr double s = 10.0;
    const double t = 1.0 / (8.0 * std::numbers::pi);
    const double inner = x2 - b * x1 * x1 + c * x1 - r;
    return a * inner * inner + s * (1.0 - t) * std::cos(x1) + s;
}

}  // namespace synthetic_detail

// Test-fixture task family: one base function with a per-task uniform
// offset of the optimum location. Quadratic ranges come out analytically;
// the branin variant ranges over a dense grid.
inline SyntheticFamily synthetic_family(SyntheticKind kind, std::size_t n_tasks,
                                        double shift_range, std::uint64_t seed) {
    if (n_tasks < 1) throw std::invalid_argument("need at least one task");
    Rng rng = derive_stream(seed, "synthetic_shifts");
    SyntheticFamily fam;

    for (std::size_t t = 0; t < n_tasks; ++t) {
        std::vector<double> shift(2);
        for (auto& s : shift) s = rng.uniform(-shift_range, shift_range);
        fam.shifts.push_back(shift);

        BenchmarkTask task;
        if (kind == SyntheticKind::shifted_quadratic) {
            task.id = "quadratic_" + std::to_string(t);
            task.space = SearchSpace({VariableSpec::make_continuous("x1", 0.0, 1.0),
                                      VariableSpec::make_continuous("x2", 0.0, 1.0)});
            const double o1 = 0.5 + shift[0], o2 = 0.5 + shift[1];
            task.evaluator = [o1, o2](const Configuration& c) {
                return (c[0] - o1) * (c[0] - o1) + (c[1] - o2) * (c[1] - o2);
            };
            double lo = 0.0;
            // Optimum can sit outside the box for large shifts.
            const double c1 = std::clamp(o1, 0.0, 1.0), c2 = std::clamp(o2, 0.0, 1.0);
            lo = (c1 - o1) * (c1 - o1) + (c2 - o2) * (c2 - o2);
            const double hi = std::max((0.0 - o1) * (0.0 - o1), (1.0 - o1) * (1.0 - o1)) +
                              std::max((0.0 - o2) * (0.0 - o2), (1.0 - o2) * (1.0 - o2));
            task.known_range = {lo, hi};
        } else {
            task.id = "branin_" + std::to_string(t);
            task.space = SearchSpace({VariableSpec::make_continuous("x1", -5.0, 10.0),
                                      VariableSpec::make_continuous("x2", 0.0, 15.0)});
            const double d1 = shift[0] * 15.0, d2 = shift[1] * 15.0;
            task.evaluator = [d1, d2](const Configuration& c) {
                return synthetic_detail::branin(c[0] - d1, c[1] - d2);
            };
            double lo = std::numeric_limits<double>::infinity();
            double hi = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < 200; ++i) {
                for (int j = 0; j < 200; ++j) {
                    const double x1 = -5.0 + 15.0 * double(i) / 199.0;
                    const double x2 = 15.0 * double(j) / 199.0;
                    const double v = synthetic_detail::branin(x1 - d1, x2 - d2);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
            task.known_range = {lo, hi};
        }
        fam.tasks.push_back(std::move(task));
    }
    return fam;
}

}  // namespace tlbo
