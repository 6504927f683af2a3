#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "hjreg/lagrangian.hpp"

namespace hjreg::catalog {

enum class Potential { kNone, kCos, kDoubleWell };

/// Smooth cut-off radii of the double-well potential: r^4/4 - r^2/2 (+ tilt x_1)
/// inside kDoubleWellCutStart, blended with a C^2 quintic step to a constant
/// beyond kDoubleWellCutEnd.
inline constexpr double kDoubleWellCutStart = 2.5;
inline constexpr double kDoubleWellCutEnd = 3.5;

double potential_value(Potential potential, double tilt, const Vec& x);
Vec potential_gradient(Potential potential, double tilt, const Vec& x);
/// Certified global bounds (inf, sup) of the potential.
std::pair<double, double> potential_bounds(Potential potential, double tilt, int dim);

/// L(x, v) = |v|^2/2 + <drift, v> + amplitude * P(x) + shift.
struct MechanicalParams {
    int dim = 1;
    Potential potential = Potential::kNone;
    double amplitude = 1.0;
    double shift = 0.0;
    Vec drift;  // empty means zero
    double tilt = 0.0;
};

TonelliLagrangian free_particle(int dim = 1);
TonelliLagrangian mechanical(const MechanicalParams& params);
Hamiltonian mechanical_hamiltonian(const MechanicalParams& params);

/// L(x, v) = 1/2 sum_i (base_i + eps sin^2 x_i) v_i^2.
TonelliLagrangian anisotropic_quadratic(const Vec& base, double eps);
Hamiltonian anisotropic_hamiltonian(const Vec& base, double eps);

/// L(v) = cosh|v| - 1.
TonelliLagrangian cosh_lagrangian(int dim = 1);
Hamiltonian cosh_hamiltonian(int dim = 1);

/// A catalog entry resolved from a key + parameter map.
struct Entry {
    TonelliLagrangian lagrangian;
    Hamiltonian hamiltonian;
    std::optional<MechanicalParams> mechanical;
};

/// Keys: "free", "mechanical", "anisotropic", "cosh". Unknown keys or
/// parameters raise ConfigError.
Entry from_config(const std::string& key, const nlohmann::json& params);

}  // namespace hjreg::catalog
