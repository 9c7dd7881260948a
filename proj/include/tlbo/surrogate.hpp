#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "tlbo/dataset.hpp"
#include "tlbo/rng.hpp"
#include "tlbo/search_space.hpp"

namespace tlbo {

// Kernel: product of a Matern-2.5 term over numeric (encoded) dimensions and
// an exponential mismatch-count term over categorical dimensions, scaled by
// the signal variance. White noise enters the Gram diagonal only.
struct KernelHyperparams {
    double signal_variance = 1.0;
    std::vector<double> lengthscales;          // one per numeric dimension
    std::vector<double> hamming_lengthscales;  // one per categorical dimension
    double noise_variance = 1e-6;
};

// Which encoded dimensions are categorical; fixes the hyperparameter layout.
struct KernelLayout {
    std::vector<std::uint8_t> is_categorical;

    std::size_t dim() const { return is_categorical.size(); }
    std::size_t n_numeric() const {
        std::size_t n = 0;
        for (auto c : is_categorical) n += c ? 0 : 1;
        return n;
    }
    std::size_t n_categorical() const { return dim() - n_numeric(); }
};

inline KernelLayout make_kernel_layout(const SearchSpace& space) {
    KernelLayout layout;
    layout.is_categorical.reserve(space.dim());
    for (const auto& v : space.variables())
        layout.is_categorical.push_back(v.kind == VarKind::categorical ? 1 : 0);
    return layout;
}

inline double kernel_eval(const KernelHyperparams& hp, const KernelLayout& layout,
                          const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    double r2 = 0.0;
    double mismatch = 0.0;
    std::size_t num_i = 0, cat_i = 0;
    for (std::size_t d = 0; d < layout.dim(); ++d) {
        const auto i = static_cast<Eigen::Index>(d);
        if (layout.is_categorical[d]) {
            if (u[i] != v[i]) mismatch += 1.0 / hp.hamming_lengthscales[cat_i];
            ++cat_i;
        } else {
            const double z = (u[i] - v[i]) / hp.lengthscales[num_i];
            r2 += z * z;
            ++num_i;
        }
    }
    double k = hp.signal_variance;
    if (num_i > 0) {
        const double r = std::sqrt(r2);
        const double a = std::sqrt(5.0) * r;
        k *= (1.0 + a + 5.0 / 3.0 * r2) * std::exp(-a);
    }
    if (cat_i > 0) k *= std::exp(-mismatch);
    return k;
}

namespace detail {

// Derivative-free local minimizer (Nelder-Mead). Small parameter counts
// only; objective is assumed cheap relative to simplex bookkeeping.
inline std::pair<Eigen::VectorXd, double> nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
    double initial_step = 0.5, std::size_t max_evals = 2000, double ftol = 1e-9) {
    const Eigen::Index n = x0.size();
    std::vector<Eigen::VectorXd> xs(n + 1, x0);
    std::vector<double> fs(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) xs[i + 1][i] += initial_step;
    std::size_t evals = 0;
    for (Eigen::Index i = 0; i <= n; ++i) {
        fs[i] = f(xs[i]);
        ++evals;
    }
    std::vector<std::size_t> order(n + 1);
    while (true) {
        for (std::size_t i = 0; i <= std::size_t(n); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        const std::size_t best = order[0], worst = order[n], second = order[n - 1];
        if (evals >= max_evals || std::abs(fs[worst] - fs[best]) <
                                      ftol * (std::abs(fs[best]) + ftol))
            return {xs[best], fs[best]};

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i <= std::size_t(n); ++i)
            if (i != worst) centroid += xs[i];
        centroid /= double(n);

        const Eigen::VectorXd refl = centroid + (centroid - xs[worst]);
        const double f_refl = f(refl);
        ++evals;
        if (f_refl < fs[order[0]]) {
            const Eigen::VectorXd exp_pt = centroid + 2.0 * (centroid - xs[worst]);
            const double f_exp = f(exp_pt);
            ++evals;
            if (f_exp < f_refl) {
                xs[worst] = exp_pt;
                fs[worst] = f_exp;
            } else {
                xs[worst] = refl;
                fs[worst] = f_refl;
            }
        } else if (f_refl < fs[second]) {
            xs[worst] = refl;
            fs[worst] = f_refl;
        } else {
            const bool outside = f_refl < fs[worst];
            const Eigen::VectorXd contr =
                outside ? Eigen::VectorXd(centroid + 0.5 * (refl - centroid))
                        : Eigen::VectorXd(centroid - 0.5 * (centroid - xs[worst]));
            const double f_contr = f(contr);
            ++evals;
            if (f_contr < std::min(f_refl, fs[worst])) {
                xs[worst] = contr;
                fs[worst] = f_contr;
            } else {
                for (std::size_t i = 1; i <= std::size_t(n); ++i) {
                    xs[order[i]] = xs[best] + 0.5 * (xs[order[i]] - xs[best]);
                    fs[order[i]] = f(xs[order[i]]);
                    ++evals;
                }
            }
        }
    }
}

}  // namespace detail

struct GpFitOptions {
    std::size_t restarts = 5;
    double lengthscale_lo = 1e-3;  // encoded units
    double lengthscale_hi = 1e3;
    double signal_lo = 1e-3;
    double signal_hi = 1e3;
    double noise_lo = 1e-8;
    double noise_hi = 1.0;
};

// One fitted Gaussian process: standardized outputs, zero prior mean,
// cached Cholesky factorization of (K + noise I). Immutable after fit.
class GpSurrogate {
public:
    GpSurrogate(SearchSpace space, Eigen::MatrixXd train_inputs,
                Eigen::VectorXd train_outputs_std, double output_mean,
                double output_scale, KernelHyperparams hp)
        : space_(std::move(space)),
          layout_(make_kernel_layout(space_)),
          x_(std::move(train_inputs)),
          y_std_(std::move(train_outputs_std)),
          output_mean_(output_mean),
          output_scale_(output_scale),
          hp_(std::move(hp)) {
        factorize();
    }

    const SearchSpace& space() const { return space_; }
    const KernelLayout& layout() const { return layout_; }
    const KernelHyperparams& hyperparams() const { return hp_; }
    Eigen::Index n_train() const { return x_.rows(); }
    double output_mean() const { return output_mean_; }
    double output_scale() const { return output_scale_; }
    const Eigen::MatrixXd& train_inputs() const { return x_; }

    // Posterior mean/variance at x, in original output units.
    std::pair<double, double> posterior(const Configuration& x) const {
        return posterior_encoded(encode(space_, x));
    }

    std::pair<double, double> posterior_encoded(const Eigen::VectorXd& xe) const {
        const Eigen::Index m = x_.rows();
        Eigen::VectorXd k(m);
        for (Eigen::Index i = 0; i < m; ++i)
            k[i] = kernel_eval(hp_, layout_, x_.row(i).transpose(), xe);
        const double mean_std = k.dot(alpha_);
        const Eigen::VectorXd v = llt_.matrixL().solve(k);
        const double var_std =
            std::max(0.0, kernel_eval(hp_, layout_, xe, xe) - v.squaredNorm());
        return {output_mean_ + output_scale_ * mean_std,
                output_scale_ * output_scale_ * var_std};
    }

    // Leave-one-out posterior means at the training inputs (closed form from
    // the cached factorization), in original output units.
    Eigen::VectorXd loo_means() const {
        const Eigen::Index m = x_.rows();
        const Eigen::MatrixXd kinv =
            llt_.solve(Eigen::MatrixXd::Identity(m, m));
        Eigen::VectorXd out(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double mu_std = y_std_[i] - alpha_[i] / kinv(i, i);
            out[i] = output_mean_ + output_scale_ * mu_std;
        }
        return out;
    }

    double log_marginal_likelihood() const { return lml_; }
    double applied_jitter() const { return jitter_; }

private:
    void factorize() {
        const Eigen::Index m = x_.rows();
        Eigen::MatrixXd gram(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                const double k =
                    kernel_eval(hp_, layout_, x_.row(i).transpose(), x_.row(j).transpose());
                gram(i, j) = k;
                gram(j, i) = k;
            }
        }
        gram.diagonal().array() += hp_.noise_variance;

        // Jitter escalation on a failed factorization, 1e-8..1e-2 of signal.
        jitter_ = 0.0;
        double jitter = 1e-8 * hp_.signal_variance;
        const double jitter_cap = 1e-2 * hp_.signal_variance;
        while (true) {
            llt_.compute(gram);
            if (llt_.info() == Eigen::Success) break;
            if (jitter > jitter_cap)
                throw std::runtime_error("GP covariance is not positive definite after jitter");
            gram.diagonal().array() += jitter;
            jitter_ += jitter;
            jitter *= 10.0;
        }
        alpha_ = llt_.solve(y_std_);
        double log_det = 0.0;
        const auto& l = llt_.matrixLLT();
        for (Eigen::Index i = 0; i < m; ++i) log_det += std::log(l(i, i));
        constexpr double log_2pi = 1.8378770664093454835606594728112;
        lml_ = -0.5 * y_std_.dot(alpha_) - log_det - 0.5 * double(m) * log_2pi;
    }

    SearchSpace space_;
    KernelLayout layout_;
    Eigen::MatrixXd x_;
    Eigen::VectorXd y_std_;
    double output_mean_ = 0.0;
    double output_scale_ = 1.0;
    KernelHyperparams hp_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double lml_ = 0.0;
    double jitter_ = 0.0;
};

namespace detail {

inline KernelHyperparams unpack_log_params(const Eigen::VectorXd& theta,
                                           std::size_t n_num, std::size_t n_cat,
                                           const GpFitOptions& opt) {
    KernelHyperparams hp;
    Eigen::Index k = 0;
    hp.signal_variance =
        std::clamp(std::exp(theta[k++]), opt.signal_lo, opt.signal_hi);
    hp.lengthscales.resize(n_num);
    for (std::size_t i = 0; i < n_num; ++i)
        hp.lengthscales[i] =
            std::clamp(std::exp(theta[k++]), opt.lengthscale_lo, opt.lengthscale_hi);
    hp.hamming_lengthscales.resize(n_cat);
    for (std::size_t i = 0; i < n_cat; ++i)
        hp.hamming_lengthscales[i] =
            std::clamp(std::exp(theta[k++]), opt.lengthscale_lo, opt.lengthscale_hi);
    hp.noise_variance = std::clamp(std::exp(theta[k++]), opt.noise_lo, opt.noise_hi);
    return hp;
}

// Negative log marginal likelihood; -inf failures become +inf for the
// minimizer. Cheap dense evaluation, data sizes here are two-digit.
inline double negative_lml(const KernelHyperparams& hp, const KernelLayout& layout,
                           const Eigen::MatrixXd& x, const Eigen::VectorXd& y_std) {
    const Eigen::Index m = x.rows();
    Eigen::MatrixXd gram(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double k =
                kernel_eval(hp, layout, x.row(i).transpose(), x.row(j).transpose());
            gram(i, j) = k;
            gram(j, i) = k;
        }
    }
    gram.diagonal().array() += hp.noise_variance + 1e-10 * hp.signal_variance;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Eigen::VectorXd alpha = llt.solve(y_std);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) log_det += std::log(llt.matrixLLT()(i, i));
    constexpr double log_2pi = 1.8378770664093454835606594728112;
    const double lml = -0.5 * y_std.dot(alpha) - log_det - 0.5 * double(m) * log_2pi;
    return std::isfinite(lml) ? -lml : std::numeric_limits<double>::infinity();
}

}  // namespace detail

// Fits a GP by maximizing log marginal likelihood with multi-restart
// Nelder-Mead over log hyperparameters. Outputs are standardized to zero
// mean / unit variance before fitting; deterministic per seed.
inline GpSurrogate fit_gp(const SearchSpace& space, const ObservationDataset& data,
                          std::uint64_t seed, const GpFitOptions& opt = {}) {
    if (data.empty()) throw std::invalid_argument("cannot fit GP on empty dataset");
    if (data.inputs.size() != data.outputs.size())
        throw std::invalid_argument("dataset inputs/outputs size mismatch");

    const Eigen::Index m = static_cast<Eigen::Index>(data.size());
    const KernelLayout layout = make_kernel_layout(space);
    Eigen::MatrixXd x(m, static_cast<Eigen::Index>(space.dim()));
    for (Eigen::Index i = 0; i < m; ++i)
        x.row(i) = encode(space, data.inputs[static_cast<std::size_t>(i)]).transpose();

    double mean = 0.0;
    for (double y : data.outputs) mean += y;
    mean /= double(m);
    double var = 0.0;
    for (double y : data.outputs) var += (y - mean) * (y - mean);
    var /= double(m);
    const double scale = var > 1e-24 ? std::sqrt(var) : 1.0;
    Eigen::VectorXd y_std(m);
    for (Eigen::Index i = 0; i < m; ++i)
        y_std[i] = (data.outputs[static_cast<std::size_t>(i)] - mean) / scale;

    const std::size_t n_num = layout.n_numeric();
    const std::size_t n_cat = layout.n_categorical();
    const Eigen::Index n_params = static_cast<Eigen::Index>(2 + n_num + n_cat);

    const auto objective = [&](const Eigen::VectorXd& theta) {
        return detail::negative_lml(detail::unpack_log_params(theta, n_num, n_cat, opt),
                                    layout, x, y_std);
    };

    Eigen::VectorXd best_theta;
    double best_f = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < opt.restarts; ++r) {
        Eigen::VectorXd theta0(n_params);
        if (r == 0) {
            Eigen::Index k = 0;
            theta0[k++] = 0.0;  // signal 1 on standardized outputs
            for (std::size_t i = 0; i < n_num + n_cat; ++i) theta0[k++] = std::log(0.3);
            theta0[k] = std::log(1e-3);
        } else {
            Rng rng = derive_stream(seed, "gp_restart", r);
            Eigen::Index k = 0;
            theta0[k++] = rng.uniform(std::log(0.1), std::log(10.0));
            for (std::size_t i = 0; i < n_num + n_cat; ++i)
                theta0[k++] = rng.uniform(std::log(0.02), std::log(20.0));
            theta0[k] = rng.uniform(std::log(1e-6), std::log(1e-1));
        }
        auto [theta, f] = detail::nelder_mead(objective, theta0, 0.7, 400 * std::size_t(n_params));
        if (f < best_f) {
            best_f = f;
            best_theta = theta;
        }
    }
    if (!std::isfinite(best_f))
        throw std::runtime_error("GP fit failed: no hyperparameters gave a finite likelihood");

    KernelHyperparams hp = detail::unpack_log_params(best_theta, n_num, n_cat, opt);
    return GpSurrogate(space, std::move(x), std::move(y_std), mean, scale, std::move(hp));
}

}  // namespace tlbo
