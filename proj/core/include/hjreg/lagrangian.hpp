#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "hjreg/probe_report.hpp"
#include "hjreg/types.hpp"

namespace hjreg {

using ScalarField = std::function<double(double t, const Vec& x, const Vec& v)>;
using VectorField = std::function<Vec(double t, const Vec& x, const Vec& v)>;
using MatrixField = std::function<Mat(double t, const Vec& x, const Vec& v)>;

/// Growth certificates: theta(|v|) - c0 <= L <= theta_bar(|v|) and
/// |L_t| <= c (1 + c0 + L). The (L3) bound is certified for the
/// normalized Lagrangian L + c0, which has the same minimizers as L.
struct Growth {
    std::function<double(double)> theta;
    std::function<double(double)> theta_bar;
    double c0 = 0.0;
    double c = 1.0;
};

/// Closed interval of certified times.
struct TimeWindow {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    [[nodiscard]] bool contains(double t) const { return t >= lo && t <= hi; }
};

/// Exact description of e^{lambda t} (|v|^2/2 + <b, v> + c); lambda = 0 means
/// not lifted. Lagrangians of this family have closed-form fundamental
/// solutions.
struct QuadraticFreeForm {
    Vec drift;
    double shift = 0.0;
    double lambda = 0.0;
};

struct LagrangianParts {
    int dim = 1;
    std::string name;
    ScalarField eval;
    ScalarField grad_t;
    VectorField grad_x;
    VectorField grad_v;
    MatrixField hess_vv;
    /// Mixed derivative d(L_v)/dx, entry (i, j) = d^2 L / dv_i dx_j.
    MatrixField hess_vx;
    /// Mixed derivative d(L_v)/dt.
    VectorField grad_vt;
    Growth growth;
    TimeWindow window;
    bool time_independent = true;
    /// Potential has several wells; enables multistart for long horizons.
    bool multi_well = false;
    std::optional<QuadraticFreeForm> quadratic;
};

/// Time-dependent Tonelli Lagrangian L(t, x, v): C^2, L_vv positive definite,
/// superlinear growth, controlled time derivative. Immutable; copies share
/// the underlying callables.
class TonelliLagrangian {
public:
    explicit TonelliLagrangian(LagrangianParts parts);

    [[nodiscard]] int dim() const { return parts_->dim; }
    [[nodiscard]] const std::string& name() const { return parts_->name; }

    [[nodiscard]] double eval(double t, const Vec& x, const Vec& v) const { return parts_->eval(t, x, v); }
    [[nodiscard]] double operator()(double t, const Vec& x, const Vec& v) const { return eval(t, x, v); }
    [[nodiscard]] double grad_t(double t, const Vec& x, const Vec& v) const { return parts_->grad_t(t, x, v); }
    [[nodiscard]] Vec grad_x(double t, const Vec& x, const Vec& v) const { return parts_->grad_x(t, x, v); }
    [[nodiscard]] Vec grad_v(double t, const Vec& x, const Vec& v) const { return parts_->grad_v(t, x, v); }
    [[nodiscard]] Mat hess_vv(double t, const Vec& x, const Vec& v) const { return parts_->hess_vv(t, x, v); }
    [[nodiscard]] Mat hess_vx(double t, const Vec& x, const Vec& v) const { return parts_->hess_vx(t, x, v); }
    [[nodiscard]] Vec grad_vt(double t, const Vec& x, const Vec& v) const { return parts_->grad_vt(t, x, v); }

    [[nodiscard]] const Growth& growth() const { return parts_->growth; }
    [[nodiscard]] const TimeWindow& time_window() const { return parts_->window; }
    [[nodiscard]] bool time_independent() const { return parts_->time_independent; }
    [[nodiscard]] bool multi_well() const { return parts_->multi_well; }
    [[nodiscard]] const std::optional<QuadraticFreeForm>& quadratic_form() const { return parts_->quadratic; }
    [[nodiscard]] const LagrangianParts& parts() const { return *parts_; }

    /// Throws OutOfWindow unless t lies in the certified window.
    void require_in_window(double t) const;

private:
    std::shared_ptr<const LagrangianParts> parts_;
};

enum class HamiltonianProvenance { kLegendreOfL, kClosedForm };

struct HamiltonianParts {
    int dim = 1;
    ScalarField eval;     // H(t, x, p)
    VectorField grad_p;   // H_p(t, x, p)
    HamiltonianProvenance provenance = HamiltonianProvenance::kClosedForm;
};

class Hamiltonian {
public:
    explicit Hamiltonian(HamiltonianParts parts);

    [[nodiscard]] int dim() const { return parts_->dim; }
    [[nodiscard]] double eval(double t, const Vec& x, const Vec& p) const { return parts_->eval(t, x, p); }
    [[nodiscard]] double operator()(double t, const Vec& x, const Vec& p) const { return eval(t, x, p); }
    [[nodiscard]] Vec grad_p(double t, const Vec& x, const Vec& p) const { return parts_->grad_p(t, x, p); }
    [[nodiscard]] HamiltonianProvenance provenance() const { return parts_->provenance; }

private:
    std::shared_ptr<const HamiltonianParts> parts_;
};

struct LegendreResult {
    double value = 0.0;
    Vec argmax_v;
    int iterations = 0;
};

/// H(t, x, p) = sup_v <p, v> - L(t, x, v), solved by damped Newton on
/// L_v(t, x, v) = p starting from v = 0 (at most 100 iterations).
/// Throws NonConvergence when the cap is hit.
LegendreResult legendre_transform(const TonelliLagrangian& lagrangian, double t, const Vec& x, const Vec& p);

/// Hamiltonian whose values come from `legendre_transform`.
Hamiltonian legendre_hamiltonian(const TonelliLagrangian& lagrangian);

/// L^lambda(t, x, v) = e^{lambda t} L(x, v) on the window [0, horizon].
TonelliLagrangian discount_lift(const TonelliLagrangian& lagrangian, double lambda, double horizon);

/// H^lambda(t, x, p) = e^{lambda t} H(x, e^{-lambda t} p).
Hamiltonian hamiltonian_lift(const Hamiltonian& hamiltonian, double lambda);

struct TonelliSampleSpec {
    Vec x_lo;
    Vec x_hi;
    double v_radius = 3.0;
    /// Defaults to the certified window, clipped to [-1, 1] when unbounded.
    std::optional<TimeWindow> t_range;
    int count = 200;
    std::uint64_t seed = 0;
};

/// Samples (t, x, v) and reports min eig L_vv, growth-bound slack and the
/// worst (L3) ratio. Violations are recorded rather than thrown.
ProbeReport verify_tonelli(const TonelliLagrangian& lagrangian, const TonelliSampleSpec& spec);

}  // namespace hjreg
