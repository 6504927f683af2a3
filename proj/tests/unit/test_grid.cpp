#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "hjreg/grid.hpp"

namespace hjreg {
namespace {

TEST(Grid, BoxLayout) {
    const auto spec = GridSpec::box(vec1(-1.0), vec1(1.0), {5, 1, 1});
    EXPECT_EQ(spec.size(), 5u);
    EXPECT_DOUBLE_EQ(spec.spacing(0), 0.5);
    EXPECT_DOUBLE_EQ(spec.node(4)(0), 1.0);
    EXPECT_DOUBLE_EQ(spec.hi()(0), 1.0);
    const auto periodic = GridSpec::box(vec1(0.0), vec1(1.0), {4, 1, 1}, BoundaryPolicy::kPeriodic);
    EXPECT_DOUBLE_EQ(periodic.spacing(0), 0.25);
    EXPECT_DOUBLE_EQ(periodic.hi()(0), 1.0);
}

TEST(Grid, FlatAndMultiIndexRoundTrip) {
    const auto spec = GridSpec::box(Vec::Zero(3), Vec::Ones(3), {3, 4, 5});
    for (std::size_t i = 0; i < spec.size(); ++i) EXPECT_EQ(spec.flat_index(spec.multi_index(i)), i);
}

TEST(Grid, InterpolationIsExactForMultilinearFunctions) {
    const auto spec = GridSpec::box(vec2(-1, -1), vec2(1, 2), {7, 9, 1});
    auto f = [](const Vec& x) { return 1.0 + 2.0 * x(0) - x(1) + 0.5 * x(0) * x(1); };
    const auto u = GridFunction::sample(spec, f);
    for (const Vec& x : {vec2(0.13, 0.77), vec2(-0.99, 1.9), vec2(0.5, -0.25)}) {
        EXPECT_NEAR(u(x), f(x), 1e-13);
    }
    const Vec g = u.gradient(vec2(0.13, 0.77));
    EXPECT_NEAR(g(0), 2.0 + 0.5 * 0.77, 1e-12);
    EXPECT_NEAR(g(1), -1.0 + 0.5 * 0.13, 1e-12);
}

TEST(Grid, ConstantExtendClampsAndPeriodicWraps) {
    const auto clamp = GridFunction::sample(GridSpec::box(vec1(0), vec1(1), {11, 1, 1}),
                                            [](const Vec& x) { return x(0); });
    EXPECT_NEAR(clamp(vec1(2.0)), 1.0, 1e-15);
    EXPECT_NEAR(clamp(vec1(-1.0)), 0.0, 1e-15);
    const auto wrap = GridFunction::sample(
        GridSpec::box(vec1(0), vec1(2 * M_PI), {64, 1, 1}, BoundaryPolicy::kPeriodic),
        [](const Vec& x) { return std::sin(x(0)); });
    EXPECT_NEAR(wrap(vec1(0.3 + 2 * M_PI)), wrap(vec1(0.3)), 1e-14);
    EXPECT_NEAR(wrap(vec1(-0.3)), wrap(vec1(2 * M_PI - 0.3)), 1e-14);
    EXPECT_DOUBLE_EQ(wrap.neighbor(0, 0, -1), wrap[63]);
}

TEST(Grid, InterpolationErrorOfParabola) {
    // Linear interpolation of x^2 misses the midpoint by h^2 / 4.
    const auto spec = GridSpec::box(vec1(-1), vec1(1), {21, 1, 1});
    const auto u = GridFunction::sample(spec, [](const Vec& x) { return x(0) * x(0); });
    const double h = spec.spacing(0);
    EXPECT_NEAR(u.interpolation_error(), h * h / 4.0, 1e-14);
    EXPECT_NEAR(u(vec1(0.05)) - 0.0025, h * h / 4.0, 1e-14);
}

TEST(Grid, LipschitzOfAbs) {
    const auto u = GridFunction::sample(GridSpec::box(vec1(-1), vec1(1), {41, 1, 1}),
                                        [](const Vec& x) { return std::abs(x(0)); });
    EXPECT_NEAR(u.lipschitz(), 1.0, 1e-12);
}

TEST(Grid, CsvRoundTrip) {
    const auto spec = GridSpec::box(vec2(0, 0), vec2(1, 1), {4, 3, 1});
    const auto u = GridFunction::sample(spec, [](const Vec& x) { return std::exp(x(0)) / 3.0 + x(1); });
    std::stringstream buf;
    u.write_csv(buf);
    const auto back = GridFunction::read_csv(spec, buf);
    EXPECT_EQ(back.values(), u.values());
}

TEST(Grid, JsonRoundTripAndSubBox) {
    const auto spec = GridSpec::box(vec1(-2), vec1(2), {41, 1, 1});
    const auto back = GridSpec::from_json(spec.to_json());
    EXPECT_EQ(back.size(), spec.size());
    EXPECT_DOUBLE_EQ(back.spacing(0), spec.spacing(0));
    const auto sub = spec.sub_box(vec1(-0.5), vec1(0.5));
    EXPECT_EQ(sub.size(), 11u);
    EXPECT_NEAR(sub.lo(0), -0.5, 1e-12);
}

}  // namespace
}  // namespace hjreg
