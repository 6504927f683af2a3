#pragma once

#include <array>
#include <functional>
#include <span>

#include <Eigen/Dense>

#include "hjreg/types.hpp"

namespace hjreg::numerics {

/// Three-point Gauss-Legendre rule mapped to [0, 1].
struct GaussRule3 {
    static constexpr std::array<double, 3> nodes{0.11270166537925831, 0.5, 0.88729833462074169};
    static constexpr std::array<double, 3> weights{5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
};

/// Two-point Gauss-Legendre nodes on [0, 1]; used as collocation points.
inline constexpr std::array<double, 2> kGauss2Nodes{0.21132486540518713, 0.78867513459481287};

using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct LbfgsOptions {
    int memory = 8;
    int max_iterations = 200;
    double gradient_tol = 1e-10;
    double relative_decrease_tol = 1e-15;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Limited-memory BFGS with Armijo backtracking. The objective fills the
/// gradient when the pointer is non-null.
LbfgsResult lbfgs_minimize(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& options = {});

struct NelderMeadOptions {
    double initial_step = 1e-2;
    double x_tol = 1e-11;
    double f_tol = 1e-14;
    int max_evaluations = 400;
};

struct NelderMeadResult {
    Vec x;
    double value = 0.0;
    int evaluations = 0;
};

/// Box-constrained Nelder-Mead minimization in dimension <= kMaxDim.
/// Trial points are clamped into [lo, hi].
NelderMeadResult nelder_mead_minimize(const std::function<double(const Vec&)>& f, const Vec& x0,
                                      const Vec& lo, const Vec& hi,
                                      const NelderMeadOptions& options = {});

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& w);

/// Root of a continuous scalar function bracketed by [a, b] with
/// f(a) and f(b) of opposite sign (Illinois variant of regula falsi).
double bracketed_root(const std::function<double(double)>& f, double a, double b, double fa,
                      double fb, double x_tol, int max_iterations = 100);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Mat& m);

}  // namespace hjreg::numerics
