#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "tlbo/benchmarks/task.hpp"
#include "tlbo/rng.hpp"
#include "tlbo/search_space.hpp"

namespace tlbo {

// Physical parameters of one simulated cartpole. Ranges follow the task
// family the controllers are tuned against; friction is viscous damping on
// the cart velocity and the pole angular velocity.
struct CartpoleParams {
    double cart_mass = 0.3;        // kg, [0.1, 0.5]
    double pole_mass = 0.13;       // kg, [0.01, 0.25]
    double pole_length = 0.5;      // m,  [0.25, 0.75]
    double cart_friction = 5.5e-4; // [1e-4, 1e-3]
    double pole_friction = 5.5e-3; // [1e-3, 1e-2]
};

inline std::vector<CartpoleParams> sample_cartpole_family(std::size_t n_tasks,
                                                          std::uint64_t seed) {
    if (n_tasks < 1) throw std::invalid_argument("need at least one task");
    Rng rng = derive_stream(seed, "cartpole_family");
    std::vector<CartpoleParams> out;
    out.reserve(n_tasks);
    for (std::size_t i = 0; i < n_tasks; ++i) {
        CartpoleParams p;
        p.cart_mass = rng.uniform(0.1, 0.5);
        p.pole_mass = rng.uniform(0.01, 0.25);
        p.pole_length = rng.uniform(0.25, 0.75);
        p.cart_friction = rng.uniform(1e-4, 1e-3);
        p.pole_friction = rng.uniform(1e-3, 1e-2);
        out.push_back(p);
    }
    return out;
}

// Controller tuning variables: Q = diag(10^theta1, 1, 1, 0.1), R = 10^-theta2.
inline SearchSpace cartpole_space() {
    return SearchSpace({VariableSpec::make_continuous("theta1", -3.0, 2.0),
                        VariableSpec::make_continuous("theta2", 1.0, 5.0)});
}

struct CartpoleSimOptions {
    double dt = 0.01;                               // s
    std::size_t steps = 1000;
    std::array<double, 4> initial_state = {0.0, 0.1, 0.0, 0.0};  // (s, psi, sdot, psidot)
    double blowup_bound = 1e3;
    double penalty_cost = 1e6;
    double gravity = 9.81;
};

namespace cartpole_detail {

using State = Eigen::Vector4d;

// Point-mass pole on a cart, angle measured from upright. Solving the 2x2
// mass-matrix system gives the accelerations.
inline State dynamics(const CartpoleParams& p, const State& x, double u, double g) {
    const double m = p.pole_mass, big_m = p.cart_mass, l = p.pole_length;
    const double psi = x[1], sdot = x[2], psidot = x[3];
    const double c = std::cos(psi), s = std::sin(psi);

    const double a11 = big_m + m, a12 = m * l * c;
    const double a21 = m * l * c, a22 = m * l * l;
    const double r1 = u - p.cart_friction * sdot + m * l * s * psidot * psidot;
    const double r2 = m * g * l * s - p.pole_friction * psidot;
    const double det = a11 * a22 - a12 * a21;  // m l^2 (M + m sin^2) > 0

    State dx;
    dx[0] = sdot;
    dx[1] = psidot;
    dx[2] = (a22 * r1 - a12 * r2) / det;
    dx[3] = (-a21 * r1 + a11 * r2) / det;
    return dx;
}

// Linearization about the upright equilibrium.
inline void linearize(const CartpoleParams& p, double g, Eigen::Matrix4d& a,
                      Eigen::Vector4d& b) {
    const double m = p.pole_mass, big_m = p.cart_mass, l = p.pole_length;
    const double bc = p.cart_friction, bp = p.pole_friction;
    a.setZero();
    a(0, 2) = 1.0;
    a(1, 3) = 1.0;
    a(2, 1) = -m * g / big_m;
    a(2, 2) = -bc / big_m;
    a(2, 3) = bp / (l * big_m);
    a(3, 1) = (big_m + m) * g / (l * big_m);
    a(3, 2) = bc / (l * big_m);
    a(3, 3) = -(big_m + m) * bp / (m * l * l * big_m);
    b << 0.0, 0.0, 1.0 / big_m, -1.0 / (l * big_m);
}

// Continuous-time algebraic Riccati equation via the stable invariant
// subspace of the Hamiltonian matrix.
inline std::optional<Eigen::Matrix4d> solve_care(const Eigen::Matrix4d& a,
                                                 const Eigen::Vector4d& b,
                                                 const Eigen::Matrix4d& q, double r) {
    Eigen::Matrix<double, 8, 8> ham;
    ham.topLeftCorner<4, 4>() = a;
    ham.topRightCorner<4, 4>() = -b * b.transpose() / r;
    ham.bottomLeftCorner<4, 4>() = -q;
    ham.bottomRightCorner<4, 4>() = -a.transpose();

    Eigen::ComplexEigenSolver<Eigen::Matrix<double, 8, 8>> es(ham);
    if (es.info() != Eigen::Success) return std::nullopt;

    Eigen::Matrix<std::complex<double>, 4, 4> u1, u2;
    int found = 0;
    for (int i = 0; i < 8 && found < 4; ++i) {
        if (es.eigenvalues()[i].real() < 0.0) {
            u1.col(found) = es.eigenvectors().col(i).head<4>();
            u2.col(found) = es.eigenvectors().col(i).tail<4>();
            ++found;
        }
    }
    if (found != 4) return std::nullopt;

    Eigen::FullPivLU<Eigen::Matrix<std::complex<double>, 4, 4>> lu(u1);
    if (!lu.isInvertible()) return std::nullopt;
    const Eigen::Matrix4d x = (u2 * lu.inverse()).real();
    const Eigen::Matrix4d sym = 0.5 * (x + x.transpose());
    if (!sym.allFinite()) return std::nullopt;

    // Residual check guards against a wrong subspace pick.
    const Eigen::Matrix4d resid =
        a.transpose() * sym + sym * a - sym * b * b.transpose() * sym / r + q;
    if (resid.norm() > 1e-6 * std::max(1.0, q.norm())) return std::nullopt;
    return sym;
}

}  // namespace cartpole_detail

struct CartpoleGain {
    Eigen::RowVector4d gain;   // u = -gain * x
    bool closed_loop_stable = false;
};

// LQR gain for the tuning point theta, with the post-solve stability check
// on the linearized closed loop.
inline std::optional<CartpoleGain> cartpole_lqr_gain(const CartpoleParams& params,
                                                     double theta1, double theta2,
                                                     double gravity = 9.81) {
    Eigen::Matrix4d a;
    Eigen::Vector4d b;
    cartpole_detail::linearize(params, gravity, a, b);
    Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
    q.diagonal() << std::pow(10.0, theta1), 1.0, 1.0, 0.1;
    const double r = std::pow(10.0, -theta2);

    const auto x = cartpole_detail::solve_care(a, b, q, r);
    if (!x) return std::nullopt;
    CartpoleGain out;
    out.gain = (b.transpose() * *x) / r;
    const Eigen::Matrix4d a_cl = a - b * out.gain;
    out.closed_loop_stable =
        Eigen::EigenSolver<Eigen::Matrix4d>(a_cl).eigenvalues().real().maxCoeff() < 0.0;
    return out;
}

// Time-averaged quadratic cost of stabilizing the nonlinear cartpole with
// the LQR controller tuned at theta. Riccati failures, unstable closed
// loops and state blow-ups all return the penalty cost.
inline double cartpole_cost(const CartpoleParams& params, const Configuration& theta,
                            const CartpoleSimOptions& opt = {}) {
    cartpole_space().check(theta);
    const auto lqr = cartpole_lqr_gain(params, theta[0], theta[1], opt.gravity);
    if (!lqr || !lqr->closed_loop_stable) return opt.penalty_cost;

    cartpole_detail::State x;
    x << opt.initial_state[0], opt.initial_state[1], opt.initial_state[2], opt.initial_state[3];
    double total = 0.0;
    for (std::size_t k = 0; k < opt.steps; ++k) {
        if (x.cwiseAbs().maxCoeff() > opt.blowup_bound) return opt.penalty_cost;
        const double u = -(lqr->gain * x)(0);
        total += x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + 0.1 * x[3] * x[3] + 1e-5 * u * u;

        // RK4 step, control held for the whole step.
        const double h = opt.dt;
        const auto f = [&](const cartpole_detail::State& s) {
            return cartpole_detail::dynamics(params, s, u, opt.gravity);
        };
        const cartpole_detail::State k1 = f(x);
        const cartpole_detail::State k2 = f(x + 0.5 * h * k1);
        const cartpole_detail::State k3 = f(x + 0.5 * h * k2);
        const cartpole_detail::State k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) return opt.penalty_cost;
    }
    return total / double(opt.steps);
}

inline std::vector<BenchmarkTask> make_cartpole_tasks(const std::vector<CartpoleParams>& family,
                                                      const CartpoleSimOptions& opt = {}) {
    std::vector<BenchmarkTask> tasks;
    tasks.reserve(family.size());
    for (std::size_t i = 0; i < family.size(); ++i) {
        BenchmarkTask t;
        t.id = "cartpole_" + std::to_string(i);
        t.space = cartpole_space();
        const CartpoleParams params = family[i];
        t.evaluator = [params, opt](const Configuration& theta) {
            return cartpole_cost(params, theta, opt);
        };
        tasks.push_back(std::move(t));
    }
    return tasks;
}

}  // namespace tlbo
