#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "tlbo/pipeline.hpp"
#include "tlbo/search_space.hpp"

namespace tlbo {

struct RegretCurve {
    std::string method_id;
    std::vector<double> mean_regret;  // per iteration
    std::size_t n_combinations = 0;   // seed-task cells averaged
};

// Per-record normalized simple regret averaged over seed-task combinations.
// task_ranges maps task id to its (min, max) attainable output.
inline std::vector<RegretCurve> normalized_regret(
    const std::vector<RunRecord>& records,
    const std::map<std::string, std::pair<double, double>>& task_ranges) {
    std::map<std::string, std::pair<std::vector<double>, std::size_t>> acc;
    for (const auto& r : records) {
        const auto it = task_ranges.find(r.task_id);
        if (it == task_ranges.end())
            throw std::invalid_argument("no output range for task '" + r.task_id + "'");
        const auto [lo, hi] = it->second;
        if (!(hi > lo))
            throw std::invalid_argument("degenerate output range for task '" + r.task_id + "'");
        auto& [sums, count] = acc[r.method_id];
        if (sums.empty()) sums.resize(r.iterations.size(), 0.0);
        if (sums.size() != r.iterations.size())
            throw std::invalid_argument("records of method '" + r.method_id +
                                        "' have mixed lengths");
        for (std::size_t t = 0; t < r.iterations.size(); ++t)
            sums[t] += (r.iterations[t].incumbent - lo) / (hi - lo);
        ++count;
    }
    std::vector<RegretCurve> out;
    for (auto& [method, entry] : acc) {
        RegretCurve c;
        c.method_id = method;
        c.n_combinations = entry.second;
        c.mean_regret = std::move(entry.first);
        for (auto& v : c.mean_regret) v /= double(c.n_combinations);
        out.push_back(std::move(c));
    }
    return out;
}

struct RankCurve {
    std::string method_id;
    std::vector<double> mean_rank;
};

// Ranks methods by incumbent per (task, seed, iteration) with average ranks
// on ties, then averages over the seed-task cells.
inline std::vector<RankCurve> ranking_curves(const std::vector<RunRecord>& records) {
    if (records.empty()) throw std::invalid_argument("no records to rank");
    std::set<std::string> method_set;
    std::set<std::pair<std::string, std::uint64_t>> cells;
    std::size_t length = records.front().iterations.size();
    std::map<std::pair<std::string, std::uint64_t>, std::map<std::string, const RunRecord*>> grid;
    for (const auto& r : records) {
        if (r.iterations.size() != length)
            throw std::invalid_argument("ranking needs equal-length records");
        method_set.insert(r.method_id);
        cells.insert({r.task_id, r.seed});
        grid[{r.task_id, r.seed}][r.method_id] = &r;
    }
    const std::vector<std::string> methods(method_set.begin(), method_set.end());
    for (const auto& cell : cells)
        for (const auto& m : methods)
            if (!grid[cell].count(m))
                throw std::invalid_argument("method '" + m + "' missing for task '" +
                                            cell.first + "' seed " +
                                            std::to_string(cell.second));

    std::map<std::string, std::vector<double>> sums;
    for (const auto& m : methods) sums[m].resize(length, 0.0);
    for (const auto& cell : cells) {
        for (std::size_t t = 0; t < length; ++t) {
            // Average rank with ties: count strictly-better plus half the ties.
            std::vector<double> vals;
            vals.reserve(methods.size());
            for (const auto& m : methods)
                vals.push_back(grid[cell][m]->iterations[t].incumbent);
            for (std::size_t i = 0; i < methods.size(); ++i) {
                double rank = 1.0;
                for (std::size_t j = 0; j < methods.size(); ++j) {
                    if (j == i) continue;
                    if (vals[j] < vals[i]) rank += 1.0;
                    else if (vals[j] == vals[i]) rank += 0.5;
                }
                sums[methods[i]][t] += rank;
            }
        }
    }
    std::vector<RankCurve> out;
    for (const auto& m : methods) {
        RankCurve c;
        c.method_id = m;
        c.mean_rank = sums[m];
        for (auto& v : c.mean_rank) v /= double(cells.size());
        out.push_back(std::move(c));
    }
    return out;
}

// All inputs whose output lies within a relative tolerance of the dataset
// minimum. Multiple equal minima are common in historic datasets.
inline std::vector<Configuration> filter_minima(const ObservationDataset& historic,
                                                double tolerance = 1e-9) {
    if (historic.empty()) throw std::invalid_argument("dataset is empty");
    const double y_min = historic.min_output();
    const double threshold = y_min + tolerance * std::abs(y_min);
    std::vector<Configuration> out;
    for (std::size_t i = 0; i < historic.size(); ++i)
        if (historic.outputs[i] <= threshold) out.push_back(historic.inputs[i]);
    return out;
}

// A minima point tagged with its origin for the overlap analysis.
struct MinimaPoint {
    std::string task_id;
    std::uint64_t seed = 0;
    Configuration config;
};

struct ClusterAssignment {
    std::vector<MinimaPoint> points;
    std::vector<int> labels;  // contiguous from 0
    int n_clusters = 0;
    std::string warning;  // set when spectral clustering fell back
};

// Complete-linkage agglomerative clustering on Gower distances, cut so that
// no two points in one cluster exceed the threshold.
inline ClusterAssignment agglomerative_clusters(const std::vector<MinimaPoint>& points,
                                                const SearchSpace& space,
                                                double threshold = 0.02) {
    if (points.empty()) throw std::invalid_argument("no points to cluster");
    const std::size_t n = points.size();
    Eigen::MatrixXd dist(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = gower_distance(space, points[i].config, points[j].config);
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }

    std::vector<std::vector<std::size_t>> clusters(n);
    for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};
    while (clusters.size() > 1) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                double complete = 0.0;
                for (const auto a : clusters[i])
                    for (const auto b : clusters[j]) complete = std::max(complete, dist(a, b));
                if (complete < best) {
                    best = complete;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (best > threshold) break;
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }

    // Stable labels: clusters ordered by their smallest member index.
    for (auto& c : clusters) std::sort(c.begin(), c.end());
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    ClusterAssignment out;
    out.points = points;
    out.labels.assign(n, 0);
    out.n_clusters = int(clusters.size());
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (const auto i : clusters[c]) out.labels[i] = int(c);
    return out;
}

// Spectral clustering on similarity 1 - (Gower distance)^2 with normalized
// Laplacian embedding and deterministic k-means. Diagnostic only; falls back
// to agglomerative labels when the similarity degenerates.
inline ClusterAssignment spectral_clusters(const std::vector<MinimaPoint>& points,
                                           const SearchSpace& space, int k) {
    if (points.empty()) throw std::invalid_argument("no points to cluster");
    const auto n = static_cast<Eigen::Index>(points.size());
    if (k < 1 || k > int(n)) throw std::invalid_argument("cluster count out of range");

    Eigen::MatrixXd w(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double d = gower_distance(space, points[std::size_t(i)].config,
                                            points[std::size_t(j)].config);
            const double s = 1.0 - d * d;
            w(i, j) = s;
            w(j, i) = s;
        }
    }
    const Eigen::VectorXd degree = w.rowwise().sum();
    if (degree.minCoeff() <= 0.0) {
        auto out = agglomerative_clusters(points, space);
        out.warning = "spectral clustering degenerate (zero-degree point); "
                      "returning agglomerative labels";
        return out;
    }
    const Eigen::VectorXd dinv = degree.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd lap =
        Eigen::MatrixXd::Identity(n, n) - dinv.asDiagonal() * w * dinv.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
    if (es.info() != Eigen::Success) {
        auto out = agglomerative_clusters(points, space);
        out.warning = "spectral clustering eigendecomposition failed; "
                      "returning agglomerative labels";
        return out;
    }
    Eigen::MatrixXd embed = es.eigenvectors().leftCols(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double norm = embed.row(i).norm();
        if (norm > 0.0) embed.row(i) /= norm;
    }

    // Deterministic k-means: farthest-first seeding, lowest index on ties.
    std::vector<Eigen::Index> centers = {0};
    while (centers.size() < std::size_t(k)) {
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double nearest = std::numeric_limits<double>::infinity();
            for (const auto c : centers)
                nearest = std::min(nearest, (embed.row(i) - embed.row(c)).squaredNorm());
            if (nearest > far_d) {
                far_d = nearest;
                far = i;
            }
        }
        centers.push_back(far);
    }
    Eigen::MatrixXd mu(k, embed.cols());
    for (int c = 0; c < k; ++c) mu.row(c) = embed.row(centers[std::size_t(c)]);
    std::vector<int> labels(std::size_t(n), 0);
    for (int pass = 0; pass < 100; ++pass) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = (embed.row(i) - mu.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (labels[std::size_t(i)] != best) {
                labels[std::size_t(i)] = best;
                changed = true;
            }
        }
        if (!changed) break;
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(k, embed.cols());
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            acc.row(labels[std::size_t(i)]) += embed.row(i);
            counts[labels[std::size_t(i)]] += 1.0;
        }
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0.0) mu.row(c) = acc.row(c) / counts[c];
    }

    // Relabel contiguously in order of first appearance.
    std::map<int, int> remap;
    for (auto& l : labels) {
        if (!remap.count(l)) {
            const int next = int(remap.size());
            remap[l] = next;
        }
        l = remap[l];
    }
    ClusterAssignment out;
    out.points = points;
    out.labels = std::move(labels);
    out.n_clusters = int(remap.size());
    return out;
}

// Cluster-id sets per (task, seed), the raw material of the overlap metric.
inline std::map<std::pair<std::string, std::uint64_t>, std::set<int>> cluster_ids_by_cell(
    const ClusterAssignment& assignment) {
    std::map<std::pair<std::string, std::uint64_t>, std::set<int>> out;
    for (std::size_t i = 0; i < assignment.points.size(); ++i)
        out[{assignment.points[i].task_id, assignment.points[i].seed}].insert(
            assignment.labels[i]);
    return out;
}

struct OverlapResult {
    std::map<std::string, double> probability;  // per task
    std::vector<std::string> warnings;
};

// Probability of at least one overlapping minima cluster between each task
// and the union of the others, averaged over the task's seeds.
inline OverlapResult overlap_probability(
    const std::map<std::pair<std::string, std::uint64_t>, std::set<int>>& cids,
    const std::vector<std::string>& task_ids) {
    if (task_ids.size() < 2) throw std::invalid_argument("overlap needs at least 2 tasks");
    std::map<std::string, std::vector<const std::set<int>*>> by_task;
    for (const auto& [key, ids] : cids) by_task[key.first].push_back(&ids);

    OverlapResult out;
    for (const auto& task : task_ids) {
        const auto it = by_task.find(task);
        if (it == by_task.end() || it->second.empty()) {
            out.probability[task] = 0.0;
            out.warnings.push_back("task '" + task + "' has no minima points");
            continue;
        }
        const auto& own_seeds = it->second;
        double total = 0.0;
        for (const auto* own : own_seeds) {
            double prod = 1.0;
            for (const auto& other : task_ids) {
                if (other == task) continue;
                const auto jt = by_task.find(other);
                if (jt == by_task.end() || jt->second.empty()) {
                    // No minima for the other task: no overlap is possible.
                    continue;
                }
                std::size_t empty_count = 0;
                for (const auto* theirs : jt->second) {
                    bool intersects = false;
                    for (const int id : *own)
                        if (theirs->count(id)) {
                            intersects = true;
                            break;
                        }
                    if (!intersects) ++empty_count;
                }
                prod *= double(empty_count) / double(jt->second.size());
            }
            total += 1.0 - prod;
        }
        out.probability[task] = total / double(own_seeds.size());
    }
    return out;
}

}  // namespace tlbo
