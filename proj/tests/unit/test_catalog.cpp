#include <cmath>
#include <functional>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "hjreg/catalog.hpp"
#include "hjreg/error.hpp"

namespace hjreg {
namespace {

using nlohmann::json;

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::kInvalidArgument;
}

TEST(Catalog, DoubleWellValues) {
    using catalog::Potential;
    EXPECT_NEAR(catalog::potential_value(Potential::kDoubleWell, 0.0, vec1(1.0)), -0.25, 1e-15);
    EXPECT_NEAR(catalog::potential_value(Potential::kDoubleWell, 0.0, vec1(-1.0)), -0.25, 1e-15);
    EXPECT_NEAR(catalog::potential_value(Potential::kDoubleWell, 0.0, vec1(0.0)), 0.0, 1e-15);
    EXPECT_NEAR(catalog::potential_value(Potential::kDoubleWell, 0.1, vec1(0.5)), 0.0625 / 4 - 0.125 + 0.05, 1e-15);
}

TEST(Catalog, DoubleWellIsConstantBeyondCutoff) {
    using catalog::Potential;
    const double a = catalog::potential_value(Potential::kDoubleWell, 0.0, vec1(3.6));
    const double b = catalog::potential_value(Potential::kDoubleWell, 0.0, vec1(7.0));
    EXPECT_DOUBLE_EQ(a, b);
    EXPECT_NEAR(catalog::potential_gradient(Potential::kDoubleWell, 0.0, vec1(5.0))(0), 0.0, 1e-15);
}

TEST(Catalog, PotentialGradientsMatchFiniteDifferences) {
    using catalog::Potential;
    const double h = 1e-6;
    for (auto pot : {Potential::kCos, Potential::kDoubleWell}) {
        for (double r : {-2.9, -1.3, 0.2, 0.9, 2.7, 3.2}) {
            const Vec x = vec2(r, 0.4 * r);
            const Vec g = catalog::potential_gradient(pot, 0.1, x);
            for (int i = 0; i < 2; ++i) {
                Vec e = Vec::Zero(2);
                e(i) = h;
                const double fd = (catalog::potential_value(pot, 0.1, x + e) -
                                   catalog::potential_value(pot, 0.1, x - e)) / (2.0 * h);
                EXPECT_NEAR(g(i), fd, 1e-6) << "r = " << r;
            }
        }
    }
}

TEST(Catalog, MechanicalLagrangianAndHamiltonianAreConjugate) {
    catalog::MechanicalParams mp;
    mp.potential = catalog::Potential::kDoubleWell;
    mp.amplitude = 2.0;
    mp.shift = -0.3;
    mp.drift = vec1(0.4);
    const auto lag = catalog::mechanical(mp);
    const auto ham = catalog::mechanical_hamiltonian(mp);
    const Vec x = vec1(0.7);
    const Vec v = vec1(-0.6);
    const Vec p = lag.grad_v(0.0, x, v);
    // Fenchel equality at p = L_v(x, v).
    EXPECT_NEAR(ham.eval(0.0, x, p), p.dot(v) - lag.eval(0.0, x, v), 1e-14);
    EXPECT_NEAR(ham.grad_p(0.0, x, p)(0), v(0), 1e-14);
}

TEST(Catalog, FreeParticleCarriesQuadraticForm) {
    EXPECT_TRUE(catalog::free_particle(2).quadratic_form().has_value());
    catalog::MechanicalParams mp;
    mp.potential = catalog::Potential::kCos;
    EXPECT_FALSE(catalog::mechanical(mp).quadratic_form().has_value());
    EXPECT_TRUE(catalog::mechanical(mp).multi_well());
}

TEST(Catalog, FromConfigBuildsEntries) {
    const auto free = catalog::from_config("free", json{{"dim", 2}, {"shift", 0.5}});
    EXPECT_EQ(free.lagrangian.dim(), 2);
    EXPECT_NEAR(free.lagrangian.eval(0.0, vec2(0, 0), vec2(1, 1)), 1.5, 1e-15);
    const auto well = catalog::from_config("mechanical", json{{"potential", "double_well"}, {"tilt", 0.1}});
    ASSERT_TRUE(well.mechanical.has_value());
    EXPECT_DOUBLE_EQ(well.mechanical->tilt, 0.1);
    const auto aniso = catalog::from_config("anisotropic", json{{"dim", 2}, {"base", {1.0, 3.0}}});
    EXPECT_NEAR(aniso.lagrangian.eval(0.0, vec2(0, 0), vec2(1, 1)), 2.0, 1e-15);
    const auto cosh = catalog::from_config("cosh", json::object());
    EXPECT_NEAR(cosh.hamiltonian.eval(0.0, vec1(0), vec1(0)), 0.0, 1e-15);
}

TEST(Catalog, FromConfigRejectsUnknownInput) {
    EXPECT_EQ(kind_of([] { (void)catalog::from_config("nope", json::object()); }), ErrorKind::kConfigError);
    EXPECT_EQ(kind_of([] { (void)catalog::from_config("free", json{{"amplitude", 1.0}}); }),
              ErrorKind::kConfigError);
    EXPECT_EQ(kind_of([] { (void)catalog::from_config("mechanical", json{{"potential", "quartic"}}); }),
              ErrorKind::kConfigError);
    EXPECT_EQ(kind_of([] { (void)catalog::from_config("free", json{{"dim", 2}, {"drift", {1.0}}}); }),
              ErrorKind::kConfigError);
}

}  // namespace
}  // namespace hjreg
