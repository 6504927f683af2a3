#include "hjreg/discounted.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "hjreg/error.hpp"
#include "hjreg/laxoleinik.hpp"
#include "hjreg/parallel.hpp"

namespace hjreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StepContext {
    const TonelliLagrangian& lagrangian;
    const GridFunction& u;
    double w;     // (1 - e^{-lambda dt}) / lambda
    double beta;  // e^{-lambda dt}
    double dt;
    double lip;
    /// Exponentially weighted mean backward time of the step; L is evaluated
    /// at x - sbar v, which makes the running-cost quadrature second order.
    double sbar;
};

/// Solves L_v(y, v) - sbar L_x(y, v) = p with y = x - sbar v by Newton from
/// `guess`, falling back to the globalized Legendre solve at sbar = 0.
Vec solve_momentum(const TonelliLagrangian& l, const Vec& x, double sbar, const Vec& p, Vec guess) {
    for (int it = 0; it < 40; ++it) {
        const Vec y = x - sbar * guess;
        const Vec r = l.grad_v(0.0, y, guess) - sbar * l.grad_x(0.0, y, guess) - p;
        if (r.norm() <= 1e-14 * (1.0 + p.norm())) return guess;
        const Mat vx = l.hess_vx(0.0, y, guess);
        const Mat jac = l.hess_vv(0.0, y, guess) - sbar * (vx + vx.transpose());
        const Vec step = jac.partialPivLu().solve(r);
        if (!step.allFinite()) break;
        guess -= step;
        if (step.norm() <= 1e-15 * (1.0 + guess.norm())) return guess;
    }
    return legendre_transform(l, 0.0, x, p).argmax_v;
}

class Line {
public:
    explicit Line(const GridFunction& u)
        : values_(u.values()), lo_(u.spec().lo(0)), h_(u.spec().spacing(0)),
          count_(u.spec().counts[0]), periodic_(u.spec().boundary == BoundaryPolicy::kPeriodic) {}

    [[nodiscard]] double node_value(long k) const {
        if (periodic_) return values_[static_cast<std::size_t>(((k % count_) + count_) % count_)];
        return values_[static_cast<std::size_t>(std::clamp<long>(k, 0, count_ - 1))];
    }
    [[nodiscard]] double node(long k) const { return lo_ + static_cast<double>(k) * h_; }
    [[nodiscard]] long cell(double y) const { return static_cast<long>(std::floor((y - lo_) / h_)); }
    [[nodiscard]] double slope(long k) const { return (node_value(k + 1) - node_value(k)) / h_; }
    [[nodiscard]] double value(double y) const {
        const long k = cell(y);
        return node_value(k) + (y - node(k)) * slope(k);
    }
    [[nodiscard]] bool inside(double y) const {
        return periodic_ || (y >= lo_ - 1e-12 * h_ && y <= node(count_ - 1) + 1e-12 * h_);
    }
    [[nodiscard]] double spacing() const { return h_; }

private:
    const std::vector<double>& values_;
    double lo_;
    double h_;
    long count_;
    bool periodic_;
};

struct Choice {
    Vec v;
    double value = kInf;
};

Choice minimize_1d(const StepContext& c, const Line& line, const Vec& x, const Vec& warm, bool full_scan) {
    const TonelliLagrangian& l = c.lagrangian;
    auto phi = [&](const Vec& v) {
        return c.w * l.eval(0.0, x - c.sbar * v, v) + c.beta * line.value(x(0) - c.dt * v(0));
    };
    auto solve_cell = [&](long k, const Vec& guess) {
        return solve_momentum(l, x, c.sbar, vec1(c.beta * c.dt * line.slope(k) / c.w), guess);
    };
    auto foot_cell = [&](const Vec& v) { return line.cell(x(0) - c.dt * v(0)); };

    Choice best;
    auto consider = [&](const Vec& v) {
        const double value = phi(v);
        if (value < best.value || (value == best.value && v(0) < best.v(0))) best = {v, value};
    };

    if (full_scan) {
        const double speed = kappa0_bootstrap(l, c.lip * c.beta * c.dt / c.w + 1e-12, 0.0, 0.0, x) + 1e-9;
        const long k_lo = line.cell(x(0) - c.dt * speed);
        const long k_hi = line.cell(x(0) + c.dt * speed);
        Vec guess = warm.size() == 1 ? warm : vec1(0.0);
        for (long k = k_lo; k <= k_hi; ++k) {
            const Vec v = solve_cell(k, guess);
            if (foot_cell(v) == k) consider(v);
            consider(vec1((x(0) - line.node(k)) / c.dt));
        }
        consider(vec1((x(0) - line.node(k_hi + 1)) / c.dt));
        return best;
    }

    Vec v = warm;
    long k = foot_cell(v);
    int previous_dir = 0;
    for (int it = 0; it < 64; ++it) {
        v = solve_cell(k, v);
        const long kf = foot_cell(v);
        if (kf == k) {
            consider(v);
            return best;
        }
        const int dir = kf < k ? -1 : 1;
        if (previous_dir == -dir) {
            // Optimum sits on the node shared by the two cells.
            const long node = dir > 0 ? k + 1 : k;
            consider(vec1((x(0) - line.node(node)) / c.dt));
            return best;
        }
        previous_dir = dir;
        k += dir;
    }
    return minimize_1d(c, line, x, warm, true);
}

Choice minimize_nd(const StepContext& c, const Vec& x, const Vec& warm) {
    const TonelliLagrangian& l = c.lagrangian;
    auto phi = [&](const Vec& v) { return c.w * l.eval(0.0, x - c.sbar * v, v) + c.beta * c.u(x - c.dt * v); };
    Choice best;
    const int n = static_cast<int>(x.size());
    std::vector<Vec> starts{Vec::Zero(n)};
    if (warm.size() == n) starts.push_back(warm);
    for (Vec v : starts) {
        double value = phi(v);
        for (int it = 0; it < 40; ++it) {
            const Vec y = x - c.sbar * v;
            const Vec g = c.w * (l.grad_v(0.0, y, v) - c.sbar * l.grad_x(0.0, y, v)) -
                          c.beta * c.dt * c.u.gradient(x - c.dt * v);
            const Vec step = (c.w * l.hess_vv(0.0, y, v)).llt().solve(g);
            double alpha = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
                const Vec trial = v - alpha * step;
                const double tv = phi(trial);
                if (tv < value) {
                    v = trial;
                    value = tv;
                    moved = true;
                    break;
                }
            }
            if (!moved || alpha * step.norm() <= 1e-14 * (1.0 + v.norm())) break;
        }
        if (value < best.value) best = {v, value};
    }
    return best;
}

double residual_of(const TonelliLagrangian& l, double lambda, const GridFunction& u, double kink_factor) {
    const GridSpec& spec = u.spec();
    const int n = u.dim();
    const bool periodic = spec.boundary == BoundaryPolicy::kPeriodic;
    double worst = 0.0;
    for (std::size_t f = 0; f < u.size(); ++f) {
        const auto idx = spec.multi_index(f);
        bool interior = true;
        Vec grad(n);
        double spread = 0.0;
        for (int i = 0; i < n; ++i) {
            if (!periodic && (idx[i] == 0 || idx[i] + 1 == spec.counts[i])) interior = false;
            const double h = spec.spacing(i);
            const double right = (u.neighbor(f, i, 1) - u[f]) / h;
            const double left = (u[f] - u.neighbor(f, i, -1)) / h;
            spread = std::max(spread, std::abs(right - left));
            grad(i) = 0.5 * (right + left);
        }
        if (!interior || spread > kink_factor * spec.min_spacing()) continue;
        const double h_val = legendre_transform(l, 0.0, u.node(f), grad).value;
        worst = std::max(worst, std::abs(lambda * u[f] + h_val));
    }
    return worst;
}

}  // namespace

GridFunction discounted_step(const TonelliLagrangian& lagrangian, double lambda, double dt, const GridFunction& u,
                             std::vector<Vec>& controls, bool full_scan) {
    if (!(lambda > 0.0) || !(dt > 0.0)) throw Error(ErrorKind::kInvalidArgument, "need lambda > 0 and dt > 0");
    const double beta = std::exp(-lambda * dt);
    const double w = -std::expm1(-lambda * dt) / lambda;
    const double first_moment = (-std::expm1(-lambda * dt) - lambda * dt * beta) / (lambda * lambda);
    const StepContext ctx{lagrangian, u, w, beta, dt, u.lipschitz(), first_moment / w};
    const GridSpec& spec = u.spec();
    if (controls.size() != u.size()) {
        controls.assign(u.size(), Vec());
        full_scan = true;
    }
    std::vector<double> next(u.size());
    const bool one_d = u.dim() == 1;
    const Line line(u);
    parallel_for(u.size(), [&](std::size_t i) {
        const Vec x = spec.node(i);
        const Choice choice = one_d ? minimize_1d(ctx, line, x, controls[i], full_scan || controls[i].size() == 0)
                                    : minimize_nd(ctx, x, controls[i]);
        if (!std::isfinite(choice.value)) {
            throw Error(ErrorKind::kNonConvergence, "inner velocity minimization failed");
        }
        const Vec foot = x - dt * choice.v;
        if (!spec.contains(foot)) {
            throw Error(ErrorKind::kBoxExhausted, "optimal foot point left the grid box");
        }
        next[i] = choice.value;
        controls[i] = choice.v;
    });
    return GridFunction(spec, std::move(next));
}

DiscountedSolution solve_discounted(const TonelliLagrangian& lagrangian, double lambda, const GridSpec& grid,
                                    double dt, double tol_fp, const DiscountedOptions& options) {
    if (!(lambda > 0.0)) throw Error(ErrorKind::kInvalidArgument, "lambda must be positive");
    if (!(dt > 0.0)) throw Error(ErrorKind::kInvalidArgument, "dt must be positive");
    if (!(tol_fp > 0.0)) throw Error(ErrorKind::kInvalidArgument, "tol_fp must be positive");
    if (!lagrangian.time_independent()) {
        throw Error(ErrorKind::kInvalidArgument, "discounted solver needs a time-independent Lagrangian");
    }
    if (grid.dim() != lagrangian.dim()) throw Error(ErrorKind::kInvalidArgument, "grid dimension mismatch");

    const Vec zero = Vec::Zero(grid.dim());
    // Start from the supersolution max L(x, 0) / lambda: its error does not vanish
    // at the attracting equilibria, so late updates contract at exactly beta.
    double start = -kInf;
    for (std::size_t i = 0; i < grid.size(); ++i) start = std::max(start, lagrangian.eval(0.0, grid.node(i), zero));
    GridFunction u(grid, std::vector<double>(grid.size(), start / lambda));

    DiscountedSolution sol;
    sol.lambda = lambda;
    sol.dt = dt;
    sol.options = options;
    sol.contraction_factor = std::exp(-lambda * dt);
    const double stop = tol_fp * -std::expm1(-lambda * dt);
    std::vector<double> history;
    std::vector<Vec> controls;
    int growth_streak = 0;
    bool converged = false;
    for (int it = 1; it <= options.max_iterations; ++it) {
        const bool full = it == 1 || it % options.rescan_every == 0;
        GridFunction next = discounted_step(lagrangian, lambda, dt, u, controls, full);
        const double diff = next.max_abs_diff(u);
        double scale = 0.0;
        for (double v : next.values()) scale = std::max(scale, std::abs(v));
        if (!history.empty() && diff > history.back() * (1.0 + 1e-6) + 1e-13 * (1.0 + scale)) {
            if (++growth_streak >= 5) {
                throw Error(ErrorKind::kNonContraction, "value iteration updates are growing; reduce dt");
            }
        } else {
            growth_streak = 0;
        }
        history.push_back(diff);
        u = std::move(next);
        sol.iterations = it;
        sol.fixed_point_defect = diff;
        if (diff <= stop) {
            if (full) {
                converged = true;
                break;
            }
            // Confirm with a full velocity scan before stopping.
            GridFunction check = discounted_step(lagrangian, lambda, dt, u, controls, true);
            const double d = check.max_abs_diff(u);
            history.push_back(d);
            u = std::move(check);
            sol.iterations = ++it;
            sol.fixed_point_defect = d;
            if (d <= stop) {
                converged = true;
                break;
            }
        }
    }
    if (!converged) throw Error(ErrorKind::kNonConvergence, "value iteration hit the iteration cap");

    // Geometric mean of update ratios over the second half of the run.
    double log_sum = 0.0;
    int terms = 0;
    for (std::size_t k = std::max<std::size_t>(1, history.size() / 2); k < history.size(); ++k) {
        if (history[k - 1] > 0.0 && history[k] > 0.0) {
            log_sum += std::log(history[k] / history[k - 1]);
            ++terms;
        }
    }
    sol.measured_contraction = terms > 0 ? std::exp(log_sum / terms) : std::numeric_limits<double>::quiet_NaN();
    sol.controls = std::move(controls);
    sol.u = std::move(u);
    sol.residual = residual_of(lagrangian, lambda, sol.u, options.kink_factor);
    return sol;
}

nlohmann::json DiscountedSolution::to_json() const {
    nlohmann::json j;
    j["lambda"] = lambda;
    j["dt"] = dt;
    j["residual"] = residual;
    j["iterations"] = iterations;
    j["contraction_factor"] = contraction_factor;
    j["measured_contraction"] = std::isfinite(measured_contraction) ? nlohmann::json(measured_contraction)
                                                                     : nlohmann::json(nullptr);
    j["fixed_point_defect"] = fixed_point_defect;
    j["grid"] = u.spec().to_json();
    return j;
}

GridFunction lift_to_evolution(const DiscountedSolution& solution, double t) {
    if (!(t >= 0.0)) throw Error(ErrorKind::kOutOfWindow, "evolution lift needs t >= 0");
    std::vector<double> values = solution.u.values();
    const double factor = std::exp(solution.lambda * t);
    for (double& v : values) v *= factor;
    return GridFunction(solution.u.spec(), std::move(values));
}

double slope_spread(const GridFunction& u, const Vec& x) {
    const GridSpec& spec = u.spec();
    std::array<int, kMaxDim> idx{0, 0, 0};
    for (int i = 0; i < u.dim(); ++i) {
        long k = std::lround((x(i) - spec.lo(i)) / spec.spacing(i));
        if (spec.boundary == BoundaryPolicy::kPeriodic) {
            k = ((k % spec.counts[i]) + spec.counts[i]) % spec.counts[i];
        } else {
            k = std::clamp<long>(k, 0, spec.counts[i] - 1);
        }
        idx[i] = static_cast<int>(k);
    }
    const std::size_t f = spec.flat_index(idx);
    double spread = 0.0;
    for (int i = 0; i < u.dim(); ++i) {
        const double h = spec.spacing(i);
        const double right = (u.neighbor(f, i, 1) - u[f]) / h;
        const double left = (u[f] - u.neighbor(f, i, -1)) / h;
        spread = std::max(spread, std::abs(right - left));
    }
    return spread;
}

CalibratedCurve backward_calibrated_curve(const DiscountedSolution& solution, const TonelliLagrangian& lagrangian,
                                          const Vec& x, double tau, double horizon, double dt) {
    if (!(horizon > 0.0) || !(dt > 0.0)) throw Error(ErrorKind::kInvalidArgument, "need horizon > 0 and dt > 0");
    const GridFunction& u = solution.u;
    const GridSpec& spec = u.spec();
    const double lambda = solution.lambda;
    const int n = u.dim();
    if (slope_spread(u, x) > solution.options.kink_factor * spec.min_spacing()) {
        throw Error(ErrorKind::kSingularStart, "start point is a kink of u; backward curves are not unique");
    }
    Vec du(n);
    for (int i = 0; i < n; ++i) {
        Vec e = Vec::Zero(n);
        e(i) = spec.spacing(i);
        du(i) = (u(x + e) - u(x - e)) / (2.0 * spec.spacing(i));
    }
    const Vec v0 = legendre_transform(lagrangian, 0.0, x, du).argmax_v;

    // State: position, velocity, accumulated action int_s^tau L^lambda.
    struct State {
        Vec q;
        Vec v;
        double action;
    };
    auto rhs = [&](double s, const State& st) {
        const Vec lv = lagrangian.grad_v(0.0, st.q, st.v);
        const Vec force = lagrangian.grad_x(0.0, st.q, st.v) - lambda * lv - lagrangian.hess_vx(0.0, st.q, st.v) * st.v;
        const Vec acc = lagrangian.hess_vv(0.0, st.q, st.v).llt().solve(force);
        return State{st.v, acc, -std::exp(lambda * s) * lagrangian.eval(0.0, st.q, st.v)};
    };
    auto axpy = [](const State& a, double h, const State& k) {
        return State{a.q + h * k.q, a.v + h * k.v, a.action + h * k.action};
    };

    const int steps = std::max(1, static_cast<int>(std::ceil(horizon / dt - 1e-12)));
    const double h = -horizon / steps;
    std::vector<double> times{tau};
    std::vector<State> states{State{x, v0, 0.0}};
    for (int k = 0; k < steps; ++k) {
        const double s = tau + k * h;
        const State& y = states.back();
        const State k1 = rhs(s, y);
        const State k2 = rhs(s + 0.5 * h, axpy(y, 0.5 * h, k1));
        const State k3 = rhs(s + 0.5 * h, axpy(y, 0.5 * h, k2));
        const State k4 = rhs(s + h, axpy(y, h, k3));
        State next{y.q + h / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q),
                   y.v + h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
                   y.action + h / 6.0 * (k1.action + 2.0 * k2.action + 2.0 * k3.action + k4.action)};
        if (!spec.contains(next.q)) throw Error(ErrorKind::kBoxExhausted, "calibrated curve left the grid box");
        times.push_back(k + 1 == steps ? tau - horizon : s + h);
        states.push_back(std::move(next));
    }

    CalibratedCurve out;
    out.x = x;
    out.tau = tau;
    out.horizon = horizon;
    const double top = std::exp(lambda * tau) * u(x);
    for (std::size_t k = states.size(); k-- > 0;) {
        const double s = times[k];
        out.curve.times.push_back(s);
        out.curve.nodes.push_back(states[k].q);
        out.curve.velocities.push_back(states[k].v);
        out.dual.times.push_back(s);
        out.dual.momenta.push_back(std::exp(lambda * s) * lagrangian.grad_v(0.0, states[k].q, states[k].v));
        const double defect = std::abs(top - std::exp(lambda * s) * u(states[k].q) - states[k].action);
        out.calibration_defect = std::max(out.calibration_defect, defect);
    }
    out.curve.interpolation = Interpolation::kHermite;
    return out;
}

}  // namespace hjreg
