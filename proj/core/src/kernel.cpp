#include "hjreg/kernel.hpp"

#include <cmath>

#include "hjreg/error.hpp"

namespace hjreg {

SolverKernel::SolverKernel(TonelliLagrangian lagrangian, ActionOptions options)
    : ActionKernel(std::move(lagrangian)), options_(options) {}

KernelValue SolverKernel::evaluate(double s, double t, const Vec& x, const Vec& y) const {
    const FundamentalSolution fs = minimize_action(lagrangian(), s, t, x, y, options_);
    return {fs.value, fs.grad_x, fs.grad_y, fs.minimizer.velocities.front()};
}

QuadraticKernel::QuadraticKernel(TonelliLagrangian lagrangian) : ActionKernel(std::move(lagrangian)) {
    if (!this->lagrangian().quadratic_form()) {
        throw Error(ErrorKind::kInvalidArgument, "Lagrangian has no closed-form kernel");
    }
    form_ = *this->lagrangian().quadratic_form();
    if (form_.drift.size() == 0) form_.drift = Vec::Zero(this->lagrangian().dim());
}

KernelValue QuadraticKernel::evaluate(double s, double t, const Vec& x, const Vec& y) const {
    if (!(s < t)) throw Error(ErrorKind::kInvalidArgument, "kernel needs s < t");
    lagrangian().require_in_window(s);
    lagrangian().require_in_window(t);
    const double gap = t - s;
    const double lambda = form_.lambda;
    const Vec& b = form_.drift;
    KernelValue out;
    if (lambda == 0.0) {
        const Vec v = (y - x) / gap;
        out.value = 0.5 * (y - x).squaredNorm() / gap + b.dot(y - x) + form_.shift * gap;
        out.grad_y = v + b;
        out.grad_x = -out.grad_y;
        out.velocity_start = v;
        return out;
    }
    // Minimizers satisfy e^{lambda tau} (xi' + b) = C.
    const double span = std::exp(-lambda * s) - std::exp(-lambda * t);
    const Vec c = lambda * (y - x + b * gap) / span;
    out.value = 0.5 * c.squaredNorm() * span / lambda +
                (form_.shift - 0.5 * b.squaredNorm()) * (std::exp(lambda * t) - std::exp(lambda * s)) / lambda;
    out.grad_y = c;
    out.grad_x = -c;
    out.velocity_start = c * std::exp(-lambda * s) - b;
    return out;
}

std::shared_ptr<const ActionKernel> make_kernel(const TonelliLagrangian& lagrangian, KernelChoice choice,
                                                const ActionOptions& options) {
    const bool has_closed = lagrangian.quadratic_form().has_value();
    if (choice == KernelChoice::kClosedForm || (choice == KernelChoice::kAuto && has_closed)) {
        return std::make_shared<QuadraticKernel>(lagrangian);
    }
    return std::make_shared<SolverKernel>(lagrangian, options);
}

}  // namespace hjreg
