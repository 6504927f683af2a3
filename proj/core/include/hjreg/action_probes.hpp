#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hjreg/action.hpp"
#include "hjreg/probe_report.hpp"

namespace hjreg {

struct ProbeOptions {
    int samples = 200;
    std::uint64_t seed = 0;
    ActionOptions action;
};

/// Tabulates sup|xi'|, sup|p| and sup|xi - x| over minimizers with
/// y in the closed ball B(x, R), bucketed by r = R / (t - s). Checks that
/// the empirical kappa_T table is nondecreasing in r.
/// Tables: "kappa_T", "momentum", "excursion".
ProbeReport probe_velocity_bounds(const TonelliLagrangian& lagrangian, const Vec& x, double radius,
                                  const std::vector<std::pair<double, double>>& time_pairs,
                                  const ProbeOptions& options = {});

/// Samples minimizers of A_{s, t+h}(x, y + z) with T = t - s < 1,
/// y in B(x, lambda T), |z| < lambda T and -T/2 < h < 1 - T, and checks that
/// (tau, xi, xi') and (tau, xi, p) stay in [s, s + 1] x B(x, k) x B(0, k),
/// where k = kappa(4 lambda) is estimated on the sphere |y - x| = 4 lambda (t - s).
/// Constants: "kappa_4lambda", "max_speed", "max_momentum", "max_excursion".
ProbeReport probe_compact_containment(const TonelliLagrangian& lagrangian, const Vec& x, double lambda_cone,
                                      double s, double horizon, const ProbeOptions& options = {});

/// Midpoint defects A(t+h, y+z) + A(t-h, y-z) - 2 A(t, y) scaled by
/// T / (h^2 + |z|^2) for each T in `horizons`.
/// Constants: "C_lambda" (h = 0 slice), "C_lambda_joint" and per-T values.
/// Checks that both constants stay within a factor 10 across horizons.
ProbeReport probe_semiconcavity(const TonelliLagrangian& lagrangian, const Vec& x, double s,
                                const std::vector<double>& horizons, double lambda_cone,
                                const ProbeOptions& options = {});

/// Lower bounds on midpoint defects for each T in `horizons`:
/// "C''_lambda" (semiconvexity with h in [0, T/2)), "C'''_lambda" (in-space
/// uniform convexity), "T'_lambda" (largest T such that every sample up to it
/// converged) and "T''_lambda" (largest T up to which the in-space constant
/// stays positive). Table "C'''_by_T" holds the per-T in-space constant.
ProbeReport probe_convexity(const TonelliLagrangian& lagrangian, const Vec& x, double s, double lambda_cone,
                            const std::vector<double>& horizons, const ProbeOptions& options = {});

}  // namespace hjreg
