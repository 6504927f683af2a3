#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "hjreg/catalog.hpp"
#include "hjreg/error.hpp"
#include "hjreg/lasrylions.hpp"

namespace hjreg {
namespace {

DiscountedSolution wrap(double lambda, GridFunction u) {
    DiscountedSolution s;
    s.lambda = lambda;
    s.dt = u.spec().min_spacing();
    s.u = std::move(u);
    return s;
}

GridFunction neg_abs_field() {
    return GridFunction::sample(GridSpec::box(vec1(-2.0), vec1(2.0), {201, 1, 1}),
                                [](const Vec& x) { return -std::abs(x(0)); });
}

TonelliLagrangian drifted(double b) {
    catalog::MechanicalParams mp;
    mp.drift = vec1(b);
    return catalog::mechanical(mp);
}

TEST(Extrapolate, GeometricSequenceIsExact) {
    std::vector<Vec> seq;
    for (int k = 0; k < 6; ++k) seq.push_back(vec2(1.0 + std::pow(0.5, k), -2.0 + 3.0 * std::pow(0.5, k)));
    const auto e = extrapolate(seq, 1e-10);
    ASSERT_TRUE(e.limit.has_value());
    EXPECT_NEAR((*e.limit)(0), 1.0, 1e-12);
    EXPECT_NEAR((*e.limit)(1), -2.0, 1e-12);
    EXPECT_TRUE(e.converged);
    EXPECT_EQ(e.extrapolants.size(), 4u);
}

TEST(Extrapolate, ConstantAndShortSequences) {
    const auto c = extrapolate({vec1(3.0), vec1(3.0), vec1(3.0), vec1(3.0), vec1(3.0)}, 1e-12);
    EXPECT_TRUE(c.converged);
    EXPECT_DOUBLE_EQ((*c.limit)(0), 3.0);
    const auto s = extrapolate({vec1(1.0), vec1(2.0)}, 1e-3);
    EXPECT_FALSE(s.converged);
    EXPECT_DOUBLE_EQ((*s.limit)(0), 2.0);
}

TEST(Extrapolate, LinearSequenceUsesRichardson) {
    // s_k = 1 + t_k with t_k halving: second differences do not vanish, Aitken is exact too.
    std::vector<Vec> seq;
    for (int k = 0; k < 6; ++k) seq.push_back(vec1(1.0 + 0.2 * std::pow(0.5, k)));
    EXPECT_NEAR((*extrapolate(seq, 1e-9).limit)(0), 1.0, 1e-12);
    // Arithmetic sequence: zero second difference, Richardson step 2c - b.
    const auto r = extrapolate({vec1(0.0), vec1(1.0), vec1(2.0)}, 1e-9);
    EXPECT_DOUBLE_EQ((*r.limit)(0), 3.0);
}

TEST(IntrinsicRegularize, ConstantSolution) {
    const double a = 0.4;
    const double lambda = 0.5;
    catalog::MechanicalParams mp;
    mp.shift = a;
    const auto lag = catalog::mechanical(mp);
    const auto u = GridFunction::sample(GridSpec::box(vec1(-1.0), vec1(1.0), {101, 1, 1}),
                                        [&](const Vec&) { return a / lambda; });
    const double t = 0.1;
    const auto reg = intrinsic_regularize(wrap(lambda, u), lag, t, {vec1(0.0), vec1(0.3)});
    // sup_y a / lambda - A^lambda(x, y) is attained at y = x where A^lambda = a (e^{lambda t} - 1) / lambda.
    const double drop = a * std::expm1(lambda * t) / lambda;
    for (const auto& p : reg.probes) {
        EXPECT_NEAR(p.value, a / lambda - drop, 1e-9);
        ASSERT_TRUE(p.gradient.has_value());
        EXPECT_NEAR((*p.gradient)(0), 0.0, 1e-9);
    }
    EXPECT_NEAR(reg.sup_error, drop, 1e-9);
    EXPECT_LT(reg.gradient_lipschitz, 1e-6);
}

TEST(IntrinsicRegularize, VanishingDiscountIsMoreauEnvelope) {
    const auto reg = intrinsic_regularize(wrap(1e-9, neg_abs_field()), catalog::free_particle(1), 0.2, {vec1(0.5)});
    double err = 0.0;
    for (std::size_t i = 0; i < reg.value.size(); ++i) {
        const double x = reg.value.node(i)(0);
        const double exact = std::abs(x) <= 0.2 ? -x * x / 0.4 : -std::abs(x) + 0.1;
        err = std::max(err, std::abs(reg.value[i] - exact));
    }
    EXPECT_LT(err, 1e-6);
    EXPECT_NEAR((*reg.probes.front().gradient)(0), -1.0, 1e-6);
}

TEST(IntrinsicRegularize, RejectsNonUniqueProbe) {
    const auto u = GridFunction::sample(GridSpec::box(vec1(-2.0), vec1(2.0), {201, 1, 1}),
                                        [](const Vec& x) { return std::abs(x(0)); });
    try {
        (void)intrinsic_regularize(wrap(0.5, u), catalog::free_particle(1), 0.2, {vec1(0.0)});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kNonUniqueMaximizer);
    }
}

TEST(ConvergenceSweep, ErrorsShrinkAndGradientsConverge) {
    const std::vector<double> t_grid = {0.2, 0.1, 0.05, 0.025};
    const auto sweep = convergence_sweep(wrap(0.5, neg_abs_field()), catalog::free_particle(1), t_grid,
                                         {vec1(0.0), vec1(0.5)});
    EXPECT_TRUE(sweep.monotone);
    ASSERT_EQ(sweep.steps.size(), 4u);
    for (std::size_t k = 1; k < 4; ++k) EXPECT_LT(sweep.steps[k].sup_error, sweep.steps[k - 1].sup_error);
    ASSERT_EQ(sweep.probes.size(), 2u);
    ASSERT_TRUE(sweep.probes[0].gradient_limit.limit.has_value());
    EXPECT_NEAR((*sweep.probes[0].gradient_limit.limit)(0), 0.0, 1e-6);
    EXPECT_NEAR((*sweep.probes[1].gradient_limit.limit)(0), -1.0, 1e-6);

    std::ostringstream csv;
    sweep.write_errors_csv(csv);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "t,sup_error,gradient_lipschitz,kappa0");

    const auto cmp = gradient_limit_vs_qx(sweep, catalog::mechanical_hamiltonian({}), neg_abs_field(), vec1(0.0));
    EXPECT_NEAR(cmp.q.q(0), 0.0, 1e-9);
    EXPECT_LT(cmp.distance, 1e-6);
}

TEST(ConvergenceSweep, RejectsIncreasingGrid) {
    try {
        (void)convergence_sweep(wrap(0.5, neg_abs_field()), catalog::free_particle(1), {0.1, 0.2}, {vec1(0.0)});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
    }
}

TEST(TraceSingularity, SymmetricKinkStaysPut) {
    const std::vector<double> t_grid = {0.2, 0.1, 0.05, 0.025, 0.0125};
    const auto trace = trace_singularity(wrap(0.5, neg_abs_field()), catalog::free_particle(1),
                                         catalog::mechanical_hamiltonian({}), vec1(0.0), t_grid);
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        EXPECT_NEAR(trace.maximizers[k](0), 0.0, 1e-9);
        EXPECT_TRUE(trace.singular[k]);
    }
    EXPECT_TRUE(trace.localized);
    EXPECT_NEAR(trace.max_jump, 0.0, 1e-9);
    EXPECT_NEAR((*trace.right_derivative.limit)(0), 0.0, 1e-9);
    EXPECT_NEAR(trace.q.q(0), 0.0, 1e-9);
    EXPECT_NEAR(trace.v0(0), 0.0, 1e-9);
    EXPECT_DOUBLE_EQ(trace.window.t1, 0.2);
}

TEST(TraceSingularity, DriftMovesTheMaximizer) {
    // With H = (p - b)^2 / 2 and b = 1.5 outside D+u(0) = [-1, 1], q = 1 and v0 = -0.5.
    const double b = 1.5;
    catalog::MechanicalParams mp;
    mp.drift = vec1(b);
    const std::vector<double> t_grid = {0.1, 0.05, 0.025, 0.0125, 0.00625};
    const auto trace = trace_singularity(wrap(1e-3, neg_abs_field()), drifted(b), catalog::mechanical_hamiltonian(mp),
                                         vec1(0.0), t_grid);
    EXPECT_NEAR(trace.q.q(0), 1.0, 1e-9);
    EXPECT_NEAR(trace.v0(0), -0.5, 1e-9);
    const double h = neg_abs_field().spec().min_spacing();
    EXPECT_NEAR((*trace.right_derivative.limit)(0), trace.v0(0), 2.0 * h);
    for (std::size_t k = 0; k < t_grid.size(); ++k) EXPECT_LT(trace.maximizers[k](0), 0.0);
    std::ostringstream csv;
    trace.write_csv(csv);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "t,y1,diameter,singular,unique");
}

TEST(TraceSingularity, SmoothPointIsRejected) {
    const auto u = GridFunction::sample(GridSpec::box(vec1(-2.0), vec1(2.0), {201, 1, 1}),
                                        [](const Vec& x) { return -0.5 * x(0) * x(0); });
    try {
        (void)trace_singularity(wrap(0.5, u), catalog::free_particle(1), catalog::mechanical_hamiltonian({}),
                                vec1(0.3), {0.1, 0.05, 0.025});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kNotSingular);
    }
}

TEST(ConcavityWindow, FlatSolutionKeepsFullWindow) {
    const auto u = GridFunction::sample(GridSpec::box(vec1(-2.0), vec1(2.0), {201, 1, 1}),
                                        [](const Vec&) { return 1.0; });
    const auto w = strict_concavity_window(wrap(0.5, u), catalog::free_particle(1), vec1(0.0), {0.2, 0.1, 0.05});
    EXPECT_DOUBLE_EQ(w.t1, 0.2);
    EXPECT_DOUBLE_EQ(w.t2, 0.2);
    EXPECT_DOUBLE_EQ(w.c2, 0.0);
}

TEST(LambdaSweep, FreeParticleHasZeroMomentum) {
    const auto grid = GridSpec::box(vec1(0.0), vec1(2.0 * M_PI), {32, 1, 1}, BoundaryPolicy::kPeriodic);
    const auto report = lambda_sweep_problem_probe(catalog::free_particle(1), catalog::mechanical_hamiltonian({}),
                                                   {1.0, 0.5}, {vec1(1.0)}, grid, 4.0 * grid.spacing(0), 1e-9);
    EXPECT_TRUE(report.ok());
    EXPECT_NEAR(report.constant("max_distance_to_q_x"), 0.0, 1e-9);
}

}  // namespace
}  // namespace hjreg
