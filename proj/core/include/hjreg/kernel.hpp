#pragma once

#include <memory>

#include "hjreg/action.hpp"

namespace hjreg {

struct KernelValue {
    double value = 0.0;
    Vec grad_x;
    Vec grad_y;
    /// Minimizer velocity at the start time s.
    Vec velocity_start;
};

/// Source of A_{s,t}(x, y) and its endpoint gradients for the Lax-Oleinik
/// operators.
class ActionKernel {
public:
    virtual ~ActionKernel() = default;
    [[nodiscard]] virtual KernelValue evaluate(double s, double t, const Vec& x, const Vec& y) const = 0;
    [[nodiscard]] virtual bool closed_form() const = 0;
    [[nodiscard]] const TonelliLagrangian& lagrangian() const { return lagrangian_; }

protected:
    explicit ActionKernel(TonelliLagrangian lagrangian) : lagrangian_(std::move(lagrangian)) {}

private:
    TonelliLagrangian lagrangian_;
};

/// Kernel backed by `minimize_action`.
class SolverKernel final : public ActionKernel {
public:
    SolverKernel(TonelliLagrangian lagrangian, ActionOptions options);
    [[nodiscard]] KernelValue evaluate(double s, double t, const Vec& x, const Vec& y) const override;
    [[nodiscard]] bool closed_form() const override { return false; }

private:
    ActionOptions options_;
};

/// Exact kernel of e^{lambda t}(|v|^2/2 + <b, v> + c), lambda >= 0.
class QuadraticKernel final : public ActionKernel {
public:
    explicit QuadraticKernel(TonelliLagrangian lagrangian);
    [[nodiscard]] KernelValue evaluate(double s, double t, const Vec& x, const Vec& y) const override;
    [[nodiscard]] bool closed_form() const override { return true; }

private:
    QuadraticFreeForm form_;
};

enum class KernelChoice { kAuto, kSolver, kClosedForm };

/// kAuto picks the closed form when the Lagrangian carries one.
/// kClosedForm on a Lagrangian without one throws InvalidArgument.
std::shared_ptr<const ActionKernel> make_kernel(const TonelliLagrangian& lagrangian,
                                                KernelChoice choice = KernelChoice::kAuto,
                                                const ActionOptions& options = {});

}  // namespace hjreg
