#include <cmath>

#include <gtest/gtest.h>

#include "hjreg/catalog.hpp"
#include "hjreg/discounted.hpp"
#include "hjreg/error.hpp"

namespace hjreg {
namespace {

TonelliLagrangian shifted_free(int dim, double a) {
    catalog::MechanicalParams mp;
    mp.dim = dim;
    mp.shift = a;
    return catalog::mechanical(mp);
}

TonelliLagrangian double_well() {
    catalog::MechanicalParams mp;
    mp.potential = catalog::Potential::kDoubleWell;
    return catalog::mechanical(mp);
}

GridSpec periodic_circle(int count) {
    return GridSpec::box(vec1(0.0), vec1(2.0 * M_PI), {count, 1, 1}, BoundaryPolicy::kPeriodic);
}

TEST(Discounted, ConstantCaseIsExact) {
    const double a = 0.7;
    const double lambda = 0.5;
    const auto grid = GridSpec::box(vec1(-1.0), vec1(1.0), {41, 1, 1});
    const auto sol = solve_discounted(shifted_free(1, a), lambda, grid, 0.05, 1e-10);
    for (double v : sol.u.values()) EXPECT_NEAR(v, a / lambda, 1e-8);
}

TEST(Discounted, ConstantCaseIsExactIn2D) {
    const double a = -0.3;
    const double lambda = 2.0;
    const auto grid = GridSpec::box(vec2(0, 0), vec2(1, 1), {9, 9, 1}, BoundaryPolicy::kPeriodic);
    const auto sol = solve_discounted(shifted_free(2, a), lambda, grid, 0.125, 1e-10);
    for (double v : sol.u.values()) EXPECT_NEAR(v, a / lambda, 1e-8);
}

TEST(Discounted, ShiftMovesSolutionByShiftOverLambda) {
    catalog::MechanicalParams mp;
    mp.potential = catalog::Potential::kCos;
    const auto grid = periodic_circle(64);
    const double dt = 4.0 * grid.spacing(0);
    const auto base = solve_discounted(catalog::mechanical(mp), 1.0, grid, dt, 1e-9);
    mp.shift = 0.4;
    const auto moved = solve_discounted(catalog::mechanical(mp), 1.0, grid, dt, 1e-9);
    for (std::size_t i = 0; i < base.u.size(); ++i) EXPECT_NEAR(moved.u[i] - base.u[i], 0.4, 1e-7);
}

TEST(Discounted, ContractionMatchesDiscountFactor) {
    catalog::MechanicalParams mp;
    mp.potential = catalog::Potential::kCos;
    const auto grid = periodic_circle(64);
    const double lambda = 0.5;
    const double dt = 4.0 * grid.spacing(0);
    const auto sol = solve_discounted(catalog::mechanical(mp), lambda, grid, dt, 1e-9);
    EXPECT_NEAR(sol.contraction_factor, std::exp(-lambda * dt), 1e-15);
    EXPECT_NEAR(sol.measured_contraction / sol.contraction_factor, 1.0, 0.05);
    EXPECT_GT(sol.iterations, 1);
    EXPECT_LE(sol.fixed_point_defect, 1e-9 * (1.0 - sol.contraction_factor) * 1.0000001);
}

TEST(Discounted, CosSolutionSatisfiesTheEquation) {
    // The solution is symmetric about 0 and solves lambda u + |u'|^2 / 2 - cos x = 0 away from kinks.
    catalog::MechanicalParams mp;
    mp.potential = catalog::Potential::kCos;
    const auto grid = periodic_circle(128);
    const auto sol = solve_discounted(catalog::mechanical(mp), 1.0, grid, 4.0 * grid.spacing(0), 1e-9);
    EXPECT_LT(sol.residual, 0.05);
    for (int i = 1; i < 64; ++i) EXPECT_NEAR(sol.u[i], sol.u[128 - i], 1e-9);
}

TEST(Discounted, DriftLeavingTheBoxThrows) {
    catalog::MechanicalParams mp;
    mp.drift = vec1(1.0);
    const auto grid = GridSpec::box(vec1(-1.0), vec1(1.0), {41, 1, 1});
    try {
        (void)solve_discounted(catalog::mechanical(mp), 1.0, grid, 0.05, 1e-8);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kBoxExhausted);
    }
}

TEST(Discounted, RejectsBadArguments) {
    const auto grid = periodic_circle(16);
    try {
        (void)solve_discounted(catalog::free_particle(1), 0.0, grid, 0.1, 1e-8);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
    }
    try {
        (void)solve_discounted(catalog::free_particle(1), 1.0, grid, -0.1, 1e-8);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
    }
}

TEST(Discounted, LiftScalesByExponential) {
    const auto grid = periodic_circle(16);
    const auto sol = solve_discounted(shifted_free(1, 1.0), 0.5, grid, 0.2, 1e-10);
    const auto v = lift_to_evolution(sol, 0.3);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], std::exp(0.15) * sol.u[i], 1e-12);
}

class DoubleWellTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        const auto grid = GridSpec::box(vec1(-2.0), vec1(2.0), {201, 1, 1});
        solution_ = new DiscountedSolution(solve_discounted(double_well(), 0.5, grid, grid.spacing(0), 1e-9));
    }
    static void TearDownTestSuite() {
        delete solution_;
        solution_ = nullptr;
    }
    static DiscountedSolution* solution_;
};
DiscountedSolution* DoubleWellTest::solution_ = nullptr;

TEST_F(DoubleWellTest, RidgeAtOriginIsAKink) {
    const auto& u = solution_->u;
    EXPECT_GT(slope_spread(u, vec1(0.0)), 10.0 * u.spec().min_spacing());
    EXPECT_LT(slope_spread(u, vec1(0.6)), 5.0 * u.spec().min_spacing());
    // Symmetric potential: symmetric solution with the maximum at the ridge.
    for (int i = 0; i < 100; ++i) EXPECT_NEAR(u[i], u[200 - i], 1e-9);
    EXPECT_NEAR(u(vec1(1.0)), -0.25 / 0.5, 1e-2);
}

TEST_F(DoubleWellTest, CalibratedCurveHasSmallDefect) {
    const auto curve = backward_calibrated_curve(*solution_, double_well(), vec1(0.5), 0.5, 0.5, 0.01);
    EXPECT_LT(curve.calibration_defect, 5e-3);
    EXPECT_NEAR(curve.curve.times.back(), 0.5, 1e-12);
    EXPECT_NEAR(curve.curve.nodes.back()(0), 0.5, 1e-12);
    // The curve stays in the right basin.
    for (const Vec& node : curve.curve.nodes) EXPECT_GT(node(0), 0.0);
}

TEST_F(DoubleWellTest, CalibratedCurveFromKinkThrows) {
    try {
        (void)backward_calibrated_curve(*solution_, double_well(), vec1(0.0), 0.5, 0.5, 0.01);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kSingularStart);
    }
}

}  // namespace
}  // namespace hjreg
