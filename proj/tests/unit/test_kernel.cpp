#include <cmath>

#include <gtest/gtest.h>

#include "hjreg/catalog.hpp"
#include "hjreg/error.hpp"
#include "hjreg/kernel.hpp"

namespace hjreg {
namespace {

TEST(Kernel, AutoPicksClosedFormForFreeParticle) {
    EXPECT_TRUE(make_kernel(catalog::free_particle(1))->closed_form());
    catalog::MechanicalParams mp;
    mp.potential = catalog::Potential::kCos;
    EXPECT_FALSE(make_kernel(catalog::mechanical(mp))->closed_form());
}

TEST(Kernel, ClosedFormAgreesWithSolver) {
    catalog::MechanicalParams mp;
    mp.dim = 2;
    mp.shift = 0.3;
    mp.drift = vec2(0.5, -0.2);
    const auto base = catalog::mechanical(mp);
    for (const auto& lag : {base, discount_lift(base, 0.7, 1.0)}) {
        const auto exact = make_kernel(lag, KernelChoice::kClosedForm);
        const auto solver = make_kernel(lag, KernelChoice::kSolver);
        const Vec x = vec2(0.1, -0.4);
        const Vec y = vec2(0.6, 0.3);
        const auto a = exact->evaluate(0.1, 0.45, x, y);
        const auto b = solver->evaluate(0.1, 0.45, x, y);
        EXPECT_NEAR(a.value, b.value, 1e-7 * std::abs(a.value)) << lag.name();
        EXPECT_NEAR((a.grad_x - b.grad_x).norm(), 0.0, 1e-6) << lag.name();
        EXPECT_NEAR((a.grad_y - b.grad_y).norm(), 0.0, 1e-6) << lag.name();
        EXPECT_NEAR((a.velocity_start - b.velocity_start).norm(), 0.0, 1e-6) << lag.name();
    }
}

TEST(Kernel, ClosedFormRequiresQuadraticForm) {
    try {
        (void)make_kernel(catalog::cosh_lagrangian(1), KernelChoice::kClosedForm);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
    }
}

TEST(Kernel, RejectsEmptyInterval) {
    const auto k = make_kernel(catalog::free_particle(1));
    try {
        (void)k->evaluate(0.3, 0.3, vec1(0), vec1(0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
    }
}

}  // namespace
}  // namespace hjreg
