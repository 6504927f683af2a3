#include <cmath>

#include <gtest/gtest.h>

#include "hjreg/action_probes.hpp"
#include "hjreg/catalog.hpp"

namespace hjreg {
namespace {

ProbeOptions small(int samples) {
    ProbeOptions o;
    o.samples = samples;
    return o;
}

TEST(Probes, FreeParticleVelocityTableIsIdentity) {
    const auto report = probe_velocity_bounds(catalog::free_particle(1), vec1(0.0), 1.0,
                                              {{0.0, 0.25}, {0.0, 0.5}, {0.0, 1.0}}, small(30));
    EXPECT_TRUE(report.ok()) << report.to_json().dump();
    ASSERT_TRUE(report.tables.count("kappa_T"));
    for (const auto& [r, kappa] : report.tables.at("kappa_T")) EXPECT_NEAR(kappa, r, 1e-6);
}

TEST(Probes, FreeParticleSemiconcavityConstantIsOne) {
    const auto report = probe_semiconcavity(catalog::free_particle(1), vec1(0.0), 0.0, {0.1, 0.2, 0.4}, 1.0,
                                            small(30));
    EXPECT_TRUE(report.ok()) << report.to_json().dump();
    EXPECT_NEAR(report.constant("C_lambda"), 1.0, 1e-6);
}

TEST(Probes, FreeParticleConvexityConstantIsOne) {
    const auto report = probe_convexity(catalog::free_particle(1), vec1(0.0), 0.0, 1.0, {0.1, 0.2, 0.4}, small(30));
    EXPECT_TRUE(report.ok()) << report.to_json().dump();
    EXPECT_NEAR(report.constant("C'''_lambda"), 1.0, 1e-6);
}

TEST(Probes, CompactContainmentOnCosPotential) {
    catalog::MechanicalParams mp;
    mp.potential = catalog::Potential::kCos;
    const auto report = probe_compact_containment(catalog::mechanical(mp), vec1(0.3), 0.5, 0.0, 0.5, small(20));
    EXPECT_TRUE(report.ok()) << report.to_json().dump();
    EXPECT_TRUE(report.has_checks());
    EXPECT_GT(report.constant("kappa_4lambda"), 0.0);
}

TEST(Probes, SameSeedSameReport) {
    const auto lag = catalog::cosh_lagrangian(1);
    const auto a = probe_semiconcavity(lag, vec1(0.0), 0.0, {0.2}, 1.0, small(10));
    const auto b = probe_semiconcavity(lag, vec1(0.0), 0.0, {0.2}, 1.0, small(10));
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

}  // namespace
}  // namespace hjreg
