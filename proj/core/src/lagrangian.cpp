#include "hjreg/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hjreg/error.hpp"
#include "hjreg/numerics.hpp"

namespace hjreg {

TonelliLagrangian::TonelliLagrangian(LagrangianParts parts) {
    if (parts.dim < 1 || parts.dim > kMaxDim) {
        throw Error(ErrorKind::kInvalidArgument, "Lagrangian dimension must be in [1, 3]");
    }
    if (!parts.eval || !parts.grad_t || !parts.grad_x || !parts.grad_v || !parts.hess_vv ||
        !parts.hess_vx || !parts.grad_vt) {
        throw Error(ErrorKind::kInvalidArgument, "Lagrangian '" + parts.name + "' is missing a derivative");
    }
    if (!parts.growth.theta || !parts.growth.theta_bar || parts.growth.c0 < 0.0 || parts.growth.c <= 0.0) {
        throw Error(ErrorKind::kInvalidArgument, "Lagrangian '" + parts.name + "' has an invalid growth record");
    }
    if (!(parts.window.lo < parts.window.hi)) {
        throw Error(ErrorKind::kInvalidArgument, "empty time window");
    }
    parts_ = std::make_shared<const LagrangianParts>(std::move(parts));
}

void TonelliLagrangian::require_in_window(double t) const {
    if (!time_window().contains(t)) {
        std::ostringstream msg;
        msg << "time " << t << " outside certified window [" << time_window().lo << ", "
            << time_window().hi << "] of '" << name() << "'";
        throw Error(ErrorKind::kOutOfWindow, msg.str());
    }
}

Hamiltonian::Hamiltonian(HamiltonianParts parts) {
    if (!parts.eval || !parts.grad_p) throw Error(ErrorKind::kInvalidArgument, "incomplete Hamiltonian");
    parts_ = std::make_shared<const HamiltonianParts>(std::move(parts));
}

LegendreResult legendre_transform(const TonelliLagrangian& lagrangian, double t, const Vec& x, const Vec& p) {
    constexpr int kMaxIterations = 100;
    if (!p.allFinite()) throw Error(ErrorKind::kInvalidArgument, "non-finite momentum");
    const double tol = 1e-10 * (1.0 + p.norm());
    const int n = lagrangian.dim();
    Vec v = Vec::Zero(n);
    auto objective = [&](const Vec& w) { return p.dot(w) - lagrangian.eval(t, x, w); };
    double f = objective(v);
    double trust = 1.0 + p.norm();
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        const Vec residual = p - lagrangian.grad_v(t, x, v);
        if (residual.norm() <= tol) return {f, v, iter};
        const Mat hess = lagrangian.hess_vv(t, x, v);
        Vec step = hess.llt().solve(residual);
        if (!step.allFinite()) step = residual;
        if (step.norm() > trust) step *= trust / step.norm();
        double alpha = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 50; ++ls) {
            const Vec trial = v + alpha * step;
            const double ft = objective(trial);
            // the objective is strictly concave; accept any non-decrease
            if (std::isfinite(ft) && ft >= f - 1e-15 * (1.0 + std::abs(f))) {
                v = trial;
                f = ft;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!improved) break;
        trust = alpha == 1.0 ? 2.0 * trust : std::max(alpha * trust, 1e-8);
    }
    const Vec residual = p - lagrangian.grad_v(t, x, v);
    if (residual.norm() <= tol) return {f, v, kMaxIterations};
    std::ostringstream msg;
    msg << "Newton on L_v = p did not converge for '" << lagrangian.name() << "' (|residual| = "
        << residual.norm() << ")";
    throw Error(ErrorKind::kNonConvergence, msg.str());
}

Hamiltonian legendre_hamiltonian(const TonelliLagrangian& lagrangian) {
    HamiltonianParts parts;
    parts.dim = lagrangian.dim();
    parts.provenance = HamiltonianProvenance::kLegendreOfL;
    parts.eval = [lagrangian](double t, const Vec& x, const Vec& p) {
        return legendre_transform(lagrangian, t, x, p).value;
    };
    parts.grad_p = [lagrangian](double t, const Vec& x, const Vec& p) {
        return legendre_transform(lagrangian, t, x, p).argmax_v;
    };
    return Hamiltonian(std::move(parts));
}

TonelliLagrangian discount_lift(const TonelliLagrangian& lagrangian, double lambda, double horizon) {
    if (!(horizon > 0.0)) throw Error(ErrorKind::kInvalidHorizon, "discount lift needs a positive horizon");
    if (!(lambda > 0.0)) throw Error(ErrorKind::kInvalidArgument, "discount factor must be positive");
    if (!lagrangian.time_independent()) {
        throw Error(ErrorKind::kInvalidArgument, "discount lift expects a time-independent Lagrangian");
    }
    const TonelliLagrangian base = lagrangian;
    const double growth_factor = std::exp(lambda * horizon);

    LagrangianParts parts;
    parts.dim = base.dim();
    std::ostringstream name;
    name << base.name() << "^lambda=" << lambda;
    parts.name = name.str();
    parts.eval = [base, lambda](double t, const Vec& x, const Vec& v) {
        return std::exp(lambda * t) * base.eval(t, x, v);
    };
    parts.grad_t = [base, lambda](double t, const Vec& x, const Vec& v) {
        return lambda * std::exp(lambda * t) * base.eval(t, x, v);
    };
    parts.grad_x = [base, lambda](double t, const Vec& x, const Vec& v) -> Vec {
        return std::exp(lambda * t) * base.grad_x(t, x, v);
    };
    parts.grad_v = [base, lambda](double t, const Vec& x, const Vec& v) -> Vec {
        return std::exp(lambda * t) * base.grad_v(t, x, v);
    };
    parts.hess_vv = [base, lambda](double t, const Vec& x, const Vec& v) -> Mat {
        return std::exp(lambda * t) * base.hess_vv(t, x, v);
    };
    parts.hess_vx = [base, lambda](double t, const Vec& x, const Vec& v) -> Mat {
        return std::exp(lambda * t) * base.hess_vx(t, x, v);
    };
    parts.grad_vt = [base, lambda](double t, const Vec& x, const Vec& v) -> Vec {
        return lambda * std::exp(lambda * t) * base.grad_v(t, x, v);
    };
    const Growth& g = base.growth();
    parts.growth.theta = g.theta;
    parts.growth.theta_bar = [tb = g.theta_bar, growth_factor](double r) { return growth_factor * tb(r); };
    parts.growth.c0 = growth_factor * g.c0;
    parts.growth.c = lambda * (1.0 + g.c0 * growth_factor);
    parts.window = {0.0, horizon};
    parts.time_independent = false;
    parts.multi_well = base.multi_well();
    if (const auto& q = base.quadratic_form(); q && q->lambda == 0.0) {
        parts.quadratic = QuadraticFreeForm{q->drift, q->shift, lambda};
    }
    return TonelliLagrangian(std::move(parts));
}

Hamiltonian hamiltonian_lift(const Hamiltonian& hamiltonian, double lambda) {
    if (!(lambda > 0.0)) throw Error(ErrorKind::kInvalidArgument, "discount factor must be positive");
    HamiltonianParts parts;
    parts.dim = hamiltonian.dim();
    parts.provenance = hamiltonian.provenance();
    parts.eval = [hamiltonian, lambda](double t, const Vec& x, const Vec& p) {
        const double scale = std::exp(lambda * t);
        return scale * hamiltonian.eval(t, x, p / scale);
    };
    parts.grad_p = [hamiltonian, lambda](double t, const Vec& x, const Vec& p) -> Vec {
        return hamiltonian.grad_p(t, x, p * std::exp(-lambda * t));
    };
    return Hamiltonian(std::move(parts));
}

ProbeReport verify_tonelli(const TonelliLagrangian& lagrangian, const TonelliSampleSpec& spec) {
    const int n = lagrangian.dim();
    if (spec.x_lo.size() != n || spec.x_hi.size() != n) {
        throw Error(ErrorKind::kInvalidArgument, "sample box dimension mismatch");
    }
    TimeWindow range = spec.t_range.value_or(lagrangian.time_window());
    range.lo = std::max(range.lo, lagrangian.time_window().lo);
    range.hi = std::min(range.hi, lagrangian.time_window().hi);
    if (!std::isfinite(range.lo)) range.lo = std::isfinite(range.hi) ? range.hi - 2.0 : -1.0;
    if (!std::isfinite(range.hi)) range.hi = range.lo + 2.0;

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    ProbeReport report("tonelli:" + lagrangian.name());
    const Growth& g = lagrangian.growth();
    double min_eig = std::numeric_limits<double>::infinity();
    double worst_lower = std::numeric_limits<double>::infinity();
    double worst_upper = std::numeric_limits<double>::infinity();
    double worst_l3 = 0.0;
    for (int k = 0; k < spec.count; ++k) {
        const double t = range.lo + unit(rng) * (range.hi - range.lo);
        Vec x(n), v(n);
        for (int i = 0; i < n; ++i) x(i) = spec.x_lo(i) + unit(rng) * (spec.x_hi(i) - spec.x_lo(i));
        for (int i = 0; i < n; ++i) v(i) = normal(rng);
        const double radius = spec.v_radius * std::pow(unit(rng), 1.0 / n);
        if (v.norm() > 0.0) v *= radius / v.norm();

        const double value = lagrangian.eval(t, x, v);
        const double speed = v.norm();
        const double eig = numerics::min_eigenvalue(lagrangian.hess_vv(t, x, v));
        const double lower = value - (g.theta(speed) - g.c0);
        const double upper = g.theta_bar(speed) - value;
        const double normalized = 1.0 + g.c0 + value;
        const double lt = std::abs(lagrangian.grad_t(t, x, v));
        const double l3_slack = g.c * normalized - lt;
        min_eig = std::min(min_eig, eig);
        worst_lower = std::min(worst_lower, lower);
        worst_upper = std::min(worst_upper, upper);
        if (normalized > 0.0) worst_l3 = std::max(worst_l3, lt / normalized);

        std::ostringstream where;
        where << " at t=" << t << " x=" << x.transpose() << " v=" << v.transpose();
        report.record(eig, "L_vv not positive definite" + where.str());
        report.record(lower, "lower growth bound violated" + where.str());
        report.record(upper, "upper growth bound violated" + where.str());
        report.record(l3_slack, "(L3) bound violated" + where.str());
        ++report.samples;
    }
    report.constants["min_eig_Lvv"] = min_eig;
    report.constants["lower_growth_slack"] = worst_lower;
    report.constants["upper_growth_slack"] = worst_upper;
    report.constants["L3_ratio_max"] = worst_l3;
    report.constants["L3_c"] = g.c;
    report.constants["c0"] = g.c0;
    return report;
}

}  // namespace hjreg
