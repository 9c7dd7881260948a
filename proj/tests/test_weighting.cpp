#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tlbo/weighting.hpp"
#include "test_util.hpp"

using namespace tlbo;

namespace {

// Independent enumeration of mis-ranked ordered pairs.
std::size_t brute_discordant(const Eigen::VectorXd& p, const Eigen::VectorXd& y) {
    std::size_t n = 0;
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            const bool pj_less = p[j] < p[k];
            const bool yj_less = y[j] < y[k];
            if (pj_less != yj_less) ++n;
        }
    }
    return n;
}

double penalized_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& w, double alpha, bool l1) {
    const double mse = (y - x * w).squaredNorm() / double(x.rows());
    return mse + alpha * (l1 ? w.cwiseAbs().sum() : w.squaredNorm());
}

// Nested grid-search minimizer over two weights, refined three times.
Eigen::VectorXd grid_search_2d(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               double alpha, bool l1, bool positive) {
    double lo0 = positive ? 0.0 : -3.0, hi0 = 3.0;
    double lo1 = lo0, hi1 = hi0;
    Eigen::VectorXd best(2);
    double step = 0.05;
    for (int level = 0; level < 3; ++level) {
        double best_f = std::numeric_limits<double>::infinity();
        for (double w0 = lo0; w0 <= hi0 + 1e-12; w0 += step) {
            for (double w1 = lo1; w1 <= hi1 + 1e-12; w1 += step) {
                Eigen::VectorXd w(2);
                w << w0, w1;
                const double f = penalized_objective(x, y, w, alpha, l1);
                if (f < best_f) {
                    best_f = f;
                    best = w;
                }
            }
        }
        lo0 = positive ? std::max(0.0, best[0] - 1.5 * step) : best[0] - 1.5 * step;
        hi0 = best[0] + 1.5 * step;
        lo1 = positive ? std::max(0.0, best[1] - 1.5 * step) : best[1] - 1.5 * step;
        hi1 = best[1] + 1.5 * step;
        step *= 0.02;
    }
    return best;
}

PredictionMatrix make_pm(const Eigen::MatrixXd& means, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& loo = {}) {
    PredictionMatrix pm;
    pm.means = means;
    pm.y = y;
    pm.target_loo = loo;
    return pm;
}

}  // namespace

TEST_CASE("discordant pair counts") {
    Eigen::VectorXd a(3), b(3);
    a << 1, 2, 3;
    REQUIRE(discordant_pairs(a, a) == 0);
    Eigen::VectorXd p2(2), y2(2);
    p2 << 2, 1;
    y2 << 1, 2;
    REQUIRE(discordant_pairs(p2, y2) == 2);
    b << 3, 2, 1;
    a << 1, 2, 3;
    REQUIRE(discordant_pairs(b, a) == 6);
}

TEST_CASE("discordant pairs match brute force on random vectors") {
    Rng rng(31);
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::Index m = 2 + Eigen::Index(rng.uniform_index(11));  // 2..12
        Eigen::VectorXd p(m), y(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            // Occasional ties exercise the strictness of the comparisons.
            p[i] = double(rng.uniform_int(0, 5));
            y[i] = double(rng.uniform_int(0, 5));
        }
        REQUIRE(discordant_pairs(p, y) == brute_discordant(p, y));
        REQUIRE(discordant_pairs(p, y) == discordant_pairs(y, p));
        REQUIRE(discordant_pairs(p, y) <= std::size_t(m) * std::size_t(m - 1));
    }
}

TEST_CASE("monotone predictions have zero discordant pairs") {
    Rng rng(37);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd y(6), p(6);
        for (int i = 0; i < 6; ++i) y[i] = rng.normal();
        for (int i = 0; i < 6; ++i) p[i] = 2.0 * y[i] + 1.0;  // strictly monotone map
        REQUIRE(discordant_pairs(p, y) == 0);
    }
}

TEST_CASE("regression weights closed-form examples") {
    WeightingConfig cfg;
    cfg.strategy = WeightStrategy::ridge;
    cfg.bootstrap_samples = 0;

    // Perfect single predictor with no penalty.
    Eigen::MatrixXd x(3, 1);
    x << 1.0, 2.0, 3.0;
    Eigen::VectorXd y(3);
    y << 1.0, 2.0, 3.0;
    cfg.alpha = 0.0;
    REQUIRE(regression_weights(make_pm(x, y), cfg, 1)[0] == Catch::Approx(1.0).margin(1e-10));

    // Ridge alpha=1 on mu=[1,-1], y=[1,-1]: minimizer of (1-w)^2 + w^2.
    Eigen::MatrixXd x2(2, 1);
    x2 << 1.0, -1.0;
    Eigen::VectorXd y2(2);
    y2 << 1.0, -1.0;
    cfg.alpha = 1.0;
    REQUIRE(regression_weights(make_pm(x2, y2), cfg, 1)[0] == Catch::Approx(0.5).margin(1e-12));

    // Huge lasso penalty kills every weight.
    WeightingConfig lasso = cfg;
    lasso.strategy = WeightStrategy::lasso;
    lasso.alpha = 1e6;
    const auto w = regression_weights(make_pm(x, y), lasso, 1);
    REQUIRE(w.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("regression weights match nested grid-search oracle") {
    Rng rng(53);
    for (const bool l1 : {false, true}) {
        for (const bool positive : {false, true}) {
            for (int rep = 0; rep < 4; ++rep) {
                const Eigen::Index m = 12;
                Eigen::MatrixXd x(m, 2);
                Eigen::VectorXd y(m);
                for (Eigen::Index i = 0; i < m; ++i) {
                    x(i, 0) = rng.normal();
                    x(i, 1) = rng.normal();
                    y[i] = 0.8 * x(i, 0) - 0.4 * x(i, 1) + 0.1 * rng.normal();
                }
                WeightingConfig cfg;
                cfg.strategy = l1 ? WeightStrategy::lasso : WeightStrategy::ridge;
                cfg.positive_constraint = positive;
                cfg.alpha = 0.05;
                cfg.bootstrap_samples = 0;
                const auto w = regression_weights(make_pm(x, y), cfg, 1);
                const auto w_oracle = grid_search_2d(x, y, 0.05, l1, positive);
                REQUIRE(std::abs(w[0] - w_oracle[0]) < 1e-3);
                REQUIRE(std::abs(w[1] - w_oracle[1]) < 1e-3);
            }
        }
    }
}

TEST_CASE("regression weight errors and bootstrap determinism") {
    Eigen::MatrixXd x(4, 2);
    x << 1, 0, 0, 1, 1, 1, 0.5, 0.2;
    Eigen::VectorXd y(4);
    y << 1, 0.5, 1.2, 0.4;
    WeightingConfig cfg;
    cfg.strategy = WeightStrategy::ridge;
    REQUIRE_THROWS_AS(regression_weights(make_pm(x, y), cfg, 1), std::invalid_argument);
    cfg.alpha = 0.1;
    cfg.bootstrap_samples = 50;
    const auto w1 = regression_weights(make_pm(x, y), cfg, 9);
    const auto w2 = regression_weights(make_pm(x, y), cfg, 9);
    REQUIRE(w1 == w2);
    cfg.strategy = WeightStrategy::rgpe;
    REQUIRE_THROWS_AS(regression_weights(make_pm(x, y), cfg, 1), std::invalid_argument);
}

TEST_CASE("positive constraint holds over randomized problems") {
    Rng rng(61);
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::Index m = 3 + Eigen::Index(rng.uniform_index(8));
        const Eigen::Index n = 1 + Eigen::Index(rng.uniform_index(4));
        Eigen::MatrixXd x(m, n);
        Eigen::VectorXd y(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            y[i] = rng.normal();
            for (Eigen::Index j = 0; j < n; ++j) x(i, j) = rng.normal();
        }
        WeightingConfig cfg;
        cfg.strategy = rep % 2 == 0 ? WeightStrategy::lasso : WeightStrategy::ridge;
        cfg.positive_constraint = true;
        cfg.alpha = 0.02;
        cfg.bootstrap_samples = 10;
        const auto w = regression_weights(make_pm(x, y), cfg, std::uint64_t(rep));
        REQUIRE(w.minCoeff() >= 0.0);
    }
}

TEST_CASE("regression weights are equivariant to column permutation") {
    Rng rng(67);
    Eigen::MatrixXd x(10, 3);
    Eigen::VectorXd y(10);
    for (Eigen::Index i = 0; i < 10; ++i) {
        y[i] = rng.normal();
        for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = rng.normal();
    }
    WeightingConfig cfg;
    cfg.strategy = WeightStrategy::lasso;
    cfg.alpha = 0.03;
    cfg.bootstrap_samples = 25;
    const auto w = regression_weights(make_pm(x, y), cfg, 5);
    Eigen::MatrixXd xp(10, 3);
    xp.col(0) = x.col(2);
    xp.col(1) = x.col(0);
    xp.col(2) = x.col(1);
    const auto wp = regression_weights(make_pm(xp, y), cfg, 5);
    REQUIRE(wp[0] == Catch::Approx(w[2]).margin(1e-12));
    REQUIRE(wp[1] == Catch::Approx(w[0]).margin(1e-12));
    REQUIRE(wp[2] == Catch::Approx(w[1]).margin(1e-12));
}

TEST_CASE("median reduction used by alpha pre-learning") {
    REQUIRE(detail::median({3.0, 3.0, 3.0}) == 3.0);
    REQUIRE(detail::median({10.0, 0.1, 1.0}) == 1.0);
    REQUIRE(detail::median({1.0, 2.0, 3.0, 4.0}) == 2.5);
}

TEST_CASE("alpha pre-learning returns a grid value, deterministically") {
    const auto space = tlbo::test::unit_interval_1d();
    // Three shifted quadratics sampled on a small design.
    std::vector<ObservationDataset> hist;
    for (int t = 0; t < 3; ++t) {
        ObservationDataset d;
        d.task_id = "q" + std::to_string(t);
        const double shift = 0.3 + 0.1 * double(t);
        for (int i = 0; i < 12; ++i) {
            const double x = double(i) / 11.0;
            d.append(Configuration({x}), (x - shift) * (x - shift));
        }
        hist.push_back(std::move(d));
    }
    WeightingConfig cfg;
    cfg.strategy = WeightStrategy::lasso;
    const double a1 = prelearn_alpha(space, hist, cfg, 77);
    const double a2 = prelearn_alpha(space, hist, cfg, 77);
    REQUIRE(a1 == a2);
    const auto grid = alpha_grid();
    REQUIRE(std::find(grid.begin(), grid.end(), a1) != grid.end());

    REQUIRE_THROWS_AS(prelearn_alpha(space, {hist[0]}, cfg, 1), std::invalid_argument);
}

TEST_CASE("rgpe vote shares from a loss table") {
    // Source 0 strictly best in every sample: full weight.
    Eigen::MatrixXd losses(3, 4);
    losses << 0, 1, 2, 0,
              5, 5, 5, 5,
              9, 9, 9, 9;
    const auto w = rgpe_weights_from_losses(losses);
    REQUIRE(w[0] == 1.0);
    REQUIRE(w[1] == 0.0);
    REQUIRE(w[2] == 0.0);

    // Two models tied in every sample split the vote.
    Eigen::MatrixXd tied(3, 5);
    tied << 1, 1, 1, 1, 1,
            1, 1, 1, 1, 1,
            7, 7, 7, 7, 7;
    const auto wt = rgpe_weights_from_losses(tied);
    REQUIRE(wt[0] == 0.5);
    REQUIRE(wt[1] == 0.5);
    REQUIRE(wt[2] == 0.0);
}

TEST_CASE("rgpe weights match direct enumeration over shared bootstrap indices") {
    Rng rng(71);
    const Eigen::Index m = 6;
    Eigen::MatrixXd means(m, 3);
    Eigen::VectorXd y(m), loo(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        y[i] = rng.normal();
        loo[i] = rng.normal();
        for (int j = 0; j < 3; ++j) means(i, j) = rng.normal();
    }
    const auto pm = make_pm(means, y, loo);
    WeightingConfig cfg;
    cfg.strategy = WeightStrategy::rgpe;
    cfg.bootstrap_samples = 200;
    const std::uint64_t seed = 1234;
    const auto w = rgpe_weights(pm, cfg, seed);

    Eigen::VectorXd w_oracle = Eigen::VectorXd::Zero(3);
    for (std::size_t s = 0; s < 200; ++s) {
        const auto idx = bootstrap_indices(seed, "rgpe_bootstrap", s, m);
        std::vector<std::size_t> loss(3);
        for (int model = 0; model < 3; ++model) {
            Eigen::VectorXd p(m), ys(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                p[i] = model == 2 ? loo[idx[std::size_t(i)]] : means(idx[std::size_t(i)], model);
                ys[i] = y[idx[std::size_t(i)]];
            }
            loss[std::size_t(model)] = brute_discordant(p, ys);
        }
        const std::size_t lo = *std::min_element(loss.begin(), loss.end());
        std::vector<int> argmin;
        for (int model = 0; model < 3; ++model)
            if (loss[std::size_t(model)] == lo) argmin.push_back(model);
        for (int model : argmin) w_oracle[model] += 1.0 / double(argmin.size());
    }
    w_oracle /= 200.0;
    REQUIRE(w == w_oracle);
}

TEST_CASE("rgpe falls back to uniform weights below 3 observations") {
    Eigen::MatrixXd means(2, 4);
    means.setRandom();
    Eigen::VectorXd y(2), loo(2);
    y << 1, 2;
    loo << 0, 0;
    WeightingConfig cfg;
    cfg.strategy = WeightStrategy::rgpe;
    const auto w = rgpe_weights(make_pm(means, y, loo), cfg, 3);
    for (int i = 0; i < 4; ++i) REQUIRE(w[i] == 0.25);
}

TEST_CASE("rgpe and tstr weights live on the simplex") {
    Rng rng(83);
    for (int rep = 0; rep < 30; ++rep) {
        const Eigen::Index m = 3 + Eigen::Index(rng.uniform_index(6));
        const Eigen::Index n = 2 + Eigen::Index(rng.uniform_index(4));
        Eigen::MatrixXd means(m, n);
        Eigen::VectorXd y(m), loo(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            y[i] = rng.normal();
            loo[i] = rng.normal();
            for (Eigen::Index j = 0; j < n; ++j) means(i, j) = rng.normal();
        }
        const auto pm = make_pm(means, y, loo);
        WeightingConfig cfg;
        cfg.strategy = WeightStrategy::rgpe;
        cfg.bootstrap_samples = 40;
        for (const auto& w : {rgpe_weights(pm, cfg, std::uint64_t(rep)), tstr_weights(pm, cfg)}) {
            REQUIRE(w.minCoeff() >= 0.0);
            REQUIRE(w.sum() == Catch::Approx(1.0).margin(1e-9));
        }
    }
}

TEST_CASE("epanechnikov kernel values") {
    REQUIRE(epanechnikov(0.0) == 0.75);
    REQUIRE(epanechnikov(1.5) == 0.0);
    REQUIRE(epanechnikov(1.0) == 0.0);
    REQUIRE(epanechnikov(0.5) == Catch::Approx(0.75 * 0.75));
}

TEST_CASE("tstr weight normalization and fallback") {
    // Source fully anti-ordered (distance 1), target LOO perfectly ordered.
    Eigen::MatrixXd means(4, 2);
    Eigen::VectorXd y(4), loo(4);
    y << 1, 2, 3, 4;
    loo << 1, 2, 3, 4;
    means.col(0) << 4, 3, 2, 1;
    means.col(1) << 0, 0, 0, 0;  // in-sample target column unused by tstr
    WeightingConfig cfg;
    cfg.strategy = WeightStrategy::tstr;
    const auto w = tstr_weights(make_pm(means, y, loo), cfg);
    REQUIRE(w[0] == 0.0);
    REQUIRE(w[1] == 1.0);

    // Every model outside the bandwidth: all weight on the target model.
    Eigen::VectorXd bad_loo(4);
    bad_loo << 4, 3, 2, 1;
    const auto wf = tstr_weights(make_pm(means, y, bad_loo), cfg);
    REQUIRE(wf[0] == 0.0);
    REQUIRE(wf[1] == 1.0);

    Eigen::MatrixXd one_row(1, 2);
    Eigen::VectorXd y1(1), loo1(1);
    REQUIRE_THROWS_AS(tstr_weights(make_pm(one_row, y1, loo1), cfg), std::invalid_argument);
}

TEST_CASE("wac converges to the perfect predictor") {
    Rng rng(91);
    Eigen::MatrixXd x(20, 1);
    Eigen::VectorXd y(20);
    for (int i = 0; i < 20; ++i) {
        x(i, 0) = rng.normal();
        y[i] = x(i, 0);
    }
    WeightingConfig cfg;
    cfg.strategy = WeightStrategy::wac;
    cfg.sgd.l2_penalty = 0.0;
    const auto w = wac_weights(make_pm(x, y), cfg, 7);
    REQUIRE(w[0] == Catch::Approx(1.0).margin(1e-2));
}

TEST_CASE("wac agrees with the closed-form ridge solution") {
    Rng rng(97);
    const Eigen::Index m = 40;
    Eigen::MatrixXd x(m, 2);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        y[i] = 0.6 * x(i, 0) - 0.3 * x(i, 1) + 0.05 * rng.normal();
    }
    WeightingConfig cfg;
    cfg.strategy = WeightStrategy::wac;
    cfg.sgd.l2_penalty = 0.01;
    cfg.sgd.validation_fraction = 0.0;  // compare against the full-data optimum
    cfg.sgd.epochs = 4000;
    const auto w = wac_weights(make_pm(x, y), cfg, 11);

    const Eigen::MatrixXd lhs =
        x.transpose() * x / double(m) + 0.01 * Eigen::MatrixXd::Identity(2, 2);
    const Eigen::VectorXd w_closed = lhs.ldlt().solve(x.transpose() * y / double(m));
    REQUIRE(w[0] == Catch::Approx(w_closed[0]).margin(1e-2));
    REQUIRE(w[1] == Catch::Approx(w_closed[1]).margin(1e-2));
}

TEST_CASE("wac is deterministic per seed") {
    Rng rng(101);
    Eigen::MatrixXd x(10, 3);
    Eigen::VectorXd y(10);
    for (Eigen::Index i = 0; i < 10; ++i) {
        y[i] = rng.normal();
        for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    }
    WeightingConfig cfg;
    cfg.strategy = WeightStrategy::wac;
    const auto w1 = wac_weights(make_pm(x, y), cfg, 55);
    const auto w2 = wac_weights(make_pm(x, y), cfg, 55);
    REQUIRE(w1 == w2);
}
