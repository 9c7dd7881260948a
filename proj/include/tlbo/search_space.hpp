#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "tlbo/rng.hpp"

namespace tlbo {

enum class VarKind { continuous, integer, categorical };

inline const char* to_string(VarKind k) {
    switch (k) {
        case VarKind::continuous: return "continuous";
        case VarKind::integer: return "integer";
        case VarKind::categorical: return "categorical";
    }
    return "?";
}

struct VariableSpec {
    std::string name;
    VarKind kind = VarKind::continuous;
    double lower = 0.0;  // numeric kinds only
    double upper = 0.0;
    std::vector<std::string> categories;  // categorical kind only

    static VariableSpec make_continuous(std::string name, double lo, double hi) {
        return {std::move(name), VarKind::continuous, lo, hi, {}};
    }
    static VariableSpec make_integer(std::string name, std::int64_t lo, std::int64_t hi) {
        return {std::move(name), VarKind::integer, double(lo), double(hi), {}};
    }
    static VariableSpec make_categorical(std::string name, std::vector<std::string> cats) {
        return {std::move(name), VarKind::categorical, 0.0, 0.0, std::move(cats)};
    }

    bool is_numeric() const { return kind != VarKind::categorical; }
    double range() const { return upper - lower; }
    std::size_t n_categories() const { return categories.size(); }

    void validate() const {
        if (name.empty()) throw std::invalid_argument("variable needs a name");
        if (is_numeric()) {
            if (!(lower < upper))
                throw std::invalid_argument("variable '" + name + "': lower must be < upper");
        } else {
            if (categories.empty())
                throw std::invalid_argument("variable '" + name + "': no categories");
            std::unordered_set<std::string> seen(categories.begin(), categories.end());
            if (seen.size() != categories.size())
                throw std::invalid_argument("variable '" + name + "': duplicate categories");
        }
    }
};

// A point in a SearchSpace. Values are stored as doubles in domain units:
// continuous variables hold their value, integer variables an exact integer,
// categorical variables the category index.
class Configuration {
public:
    Configuration() = default;
    explicit Configuration(std::vector<double> values) : values_(std::move(values)) {}

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    const std::vector<double>& values() const { return values_; }

    std::size_t category_index(std::size_t i) const {
        return static_cast<std::size_t>(values_[i]);
    }

    friend bool operator==(const Configuration& a, const Configuration& b) {
        return a.values_ == b.values_;
    }

private:
    std::vector<double> values_;
};

class SearchSpace {
public:
    SearchSpace() = default;
    explicit SearchSpace(std::vector<VariableSpec> variables)
        : variables_(std::move(variables)) {
        if (variables_.empty()) throw std::invalid_argument("search space needs at least one variable");
        std::unordered_set<std::string> names;
        for (const auto& v : variables_) {
            v.validate();
            if (!names.insert(v.name).second)
                throw std::invalid_argument("duplicate variable name '" + v.name + "'");
        }
    }

    std::size_t dim() const { return variables_.size(); }
    const VariableSpec& variable(std::size_t i) const { return variables_[i]; }
    const std::vector<VariableSpec>& variables() const { return variables_; }

    std::size_t n_numeric() const {
        return static_cast<std::size_t>(
            std::count_if(variables_.begin(), variables_.end(),
                          [](const VariableSpec& v) { return v.is_numeric(); }));
    }
    std::size_t n_categorical() const { return dim() - n_numeric(); }

    void check(const Configuration& c) const {
        if (c.size() != dim())
            throw std::invalid_argument("configuration has wrong dimension");
        for (std::size_t i = 0; i < dim(); ++i) {
            const auto& v = variables_[i];
            const double x = c[i];
            switch (v.kind) {
                case VarKind::continuous:
                    if (!(x >= v.lower && x <= v.upper))
                        throw std::domain_error("value out of range for '" + v.name + "'");
                    break;
                case VarKind::integer:
                    if (std::round(x) != x)
                        throw std::domain_error("non-integer value for '" + v.name + "'");
                    if (!(x >= v.lower && x <= v.upper))
                        throw std::domain_error("value out of range for '" + v.name + "'");
                    break;
                case VarKind::categorical: {
                    if (std::round(x) != x || x < 0.0 ||
                        x >= double(v.n_categories()))
                        throw std::domain_error("bad category index for '" + v.name + "'");
                    break;
                }
            }
        }
    }

    bool contains(const Configuration& c) const {
        try {
            check(c);
            return true;
        } catch (const std::exception&) {
            return false;
        }
    }

private:
    std::vector<VariableSpec> variables_;
};

// Numeric feature vector used by kernels and regression: numeric variables
// min-max scaled to [0,1], categorical variables as their category index
// (compared by exact match downstream, never by magnitude).
inline Eigen::VectorXd encode(const SearchSpace& space, const Configuration& config) {
    space.check(config);
    Eigen::VectorXd out(space.dim());
    for (std::size_t i = 0; i < space.dim(); ++i) {
        const auto& v = space.variable(i);
        out[static_cast<Eigen::Index>(i)] =
            v.is_numeric() ? (config[i] - v.lower) / v.range() : config[i];
    }
    return out;
}

// Gower dissimilarity over mixed variables, mapped through sqrt(1 - S).
// Numeric similarity is 1 - |a-b|/range, categorical is exact match.
inline double gower_distance(const SearchSpace& space, const Configuration& a,
                             const Configuration& b) {
    space.check(a);
    space.check(b);
    double sim_sum = 0.0;
    for (std::size_t i = 0; i < space.dim(); ++i) {
        const auto& v = space.variable(i);
        if (v.is_numeric()) {
            const double r = v.range();
            sim_sum += r > 0.0 ? 1.0 - std::abs(a[i] - b[i]) / r : 1.0;
        } else {
            sim_sum += a[i] == b[i] ? 1.0 : 0.0;
        }
    }
    const double s = sim_sum / double(space.dim());
    return std::sqrt(std::max(0.0, 1.0 - s));
}

// Latin hypercube sample: for each numeric variable the n values land in n
// distinct equal-width strata (random permutation); categorical values are
// drawn uniformly.
inline std::vector<Configuration> sample_latin_hypercube(const SearchSpace& space,
                                                         std::size_t n,
                                                         std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    Rng rng = derive_stream(seed, "lhs");
    std::vector<std::vector<double>> columns(space.dim(), std::vector<double>(n));
    for (std::size_t d = 0; d < space.dim(); ++d) {
        const auto& v = space.variable(d);
        if (v.is_numeric()) {
            std::vector<std::size_t> strata(n);
            for (std::size_t i = 0; i < n; ++i) strata[i] = i;
            rng.shuffle(strata);
            const double width = v.range() / double(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double lo = v.lower + double(strata[i]) * width;
                double x = lo + rng.uniform() * width;
                if (v.kind == VarKind::integer) {
                    // Round, then keep the value inside its stratum whenever the
                    // stratum contains an integer.
                    double r = std::round(x);
                    const double slo = std::ceil(lo);
                    const double shi = std::ceil(lo + width) - 1.0;
                    if (slo <= shi) r = std::clamp(r, slo, shi);
                    x = std::clamp(r, v.lower, v.upper);
                }
                columns[d][i] = x;
            }
        } else {
            for (std::size_t i = 0; i < n; ++i)
                columns[d][i] = double(rng.uniform_index(v.n_categories()));
        }
    }
    std::vector<Configuration> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> vals(space.dim());
        for (std::size_t d = 0; d < space.dim(); ++d) vals[d] = columns[d][i];
        out.emplace_back(std::move(vals));
    }
    return out;
}

// Single uniform draw from the space, used by acquisition local search.
inline Configuration sample_uniform(const SearchSpace& space, Rng& rng) {
    std::vector<double> vals(space.dim());
    for (std::size_t d = 0; d < space.dim(); ++d) {
        const auto& v = space.variable(d);
        switch (v.kind) {
            case VarKind::continuous:
                vals[d] = rng.uniform(v.lower, v.upper);
                break;
            case VarKind::integer:
                vals[d] = double(rng.uniform_int(std::int64_t(v.lower), std::int64_t(v.upper)));
                break;
            case VarKind::categorical:
                vals[d] = double(rng.uniform_index(v.n_categories()));
                break;
        }
    }
    return Configuration(std::move(vals));
}

}  // namespace tlbo
