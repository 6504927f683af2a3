#include "hjreg/lasrylions.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include "hjreg/action_probes.hpp"
#include "hjreg/error.hpp"
#include "hjreg/parallel.hpp"

namespace hjreg {

namespace {

std::vector<double> as_array(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json optional_array(const std::optional<Vec>& v) {
    return v ? nlohmann::json(as_array(*v)) : nlohmann::json(nullptr);
}

nlohmann::json extrapolation_json(const Extrapolation& e) {
    nlohmann::json j;
    j["limit"] = optional_array(e.limit);
    j["spread"] = e.spread;
    j["converged"] = e.converged;
    j["extrapolants"] = nlohmann::json::array();
    for (const Vec& v : e.extrapolants) j["extrapolants"].push_back(as_array(v));
    return j;
}

void require_t_grid(const std::vector<double>& t_grid) {
    if (t_grid.empty()) throw Error(ErrorKind::kInvalidArgument, "empty t grid");
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if (!(t_grid[k] > 0.0) || (k > 0 && !(t_grid[k] < t_grid[k - 1]))) {
            throw Error(ErrorKind::kInvalidArgument, "t grid must be positive and decreasing");
        }
    }
}

std::shared_ptr<const ActionKernel> lifted_kernel(const DiscountedSolution& solution,
                                                  const TonelliLagrangian& lagrangian, double horizon,
                                                  const LasryLionsOptions& options) {
    return make_kernel(discount_lift(lagrangian, solution.lambda, horizon), options.lax.kernel,
                       options.lax.action);
}

/// Largest difference quotient of the gradient field between adjacent nodes.
double gradient_lipschitz(const GridSpec& spec, const std::vector<std::optional<Vec>>& gradients) {
    double out = 0.0;
    for (std::size_t f = 0; f < spec.size(); ++f) {
        if (!gradients[f]) continue;
        const auto idx = spec.multi_index(f);
        for (int axis = 0; axis < spec.dim(); ++axis) {
            auto next = idx;
            if (++next[axis] >= spec.counts[axis]) {
                if (spec.boundary != BoundaryPolicy::kPeriodic) continue;
                next[axis] = 0;
            }
            const auto& g = gradients[spec.flat_index(next)];
            if (g) out = std::max(out, (*g - *gradients[f]).norm() / spec.spacing(axis));
        }
    }
    return out;
}

}  // namespace

Regularization intrinsic_regularize(const DiscountedSolution& solution, const TonelliLagrangian& lagrangian,
                                    double t, const std::vector<Vec>& probe_points,
                                    const LasryLionsOptions& options) {
    if (!(t > 0.0)) throw Error(ErrorKind::kInvalidArgument, "regularization time must be positive");
    const auto kernel = lifted_kernel(solution, lagrangian, t, options);
    const GridFunction& u = solution.u;

    Regularization out;
    out.t = t;
    out.probe_points = probe_points;
    out.probes.resize(probe_points.size());
    parallel_for(probe_points.size(),
                 [&](std::size_t i) { out.probes[i] = lax_plus_at(u, *kernel, 0.0, t, probe_points[i], options.lax); });
    for (const LaxPoint& p : out.probes) {
        if (!p.record.unique) {
            throw Error(ErrorKind::kNonUniqueMaximizer, "condition (M) fails at a probe point; shrink t");
        }
        out.kappa0 = std::max(out.kappa0, p.kappa0);
    }
    if (!options.full_field) return out;

    LaxResult field = lax_plus(u, *kernel, 0.0, t, options.lax);
    out.kappa0 = std::max(out.kappa0, field.kappa0_bound);
    const GridSpec& spec = field.value.spec();
    for (std::size_t f = 0; f < spec.size(); ++f) {
        out.sup_error = std::max(out.sup_error, std::abs(field.value[f] - u(spec.node(f))));
    }
    out.gradient_lipschitz = gradient_lipschitz(spec, field.gradients);
    out.value = std::move(field.value);
    out.gradients = std::move(field.gradients);
    return out;
}

Extrapolation extrapolate(const std::vector<Vec>& sequence, double tol) {
    Extrapolation out;
    for (std::size_t k = 2; k < sequence.size(); ++k) {
        const Vec& a = sequence[k - 2];
        const Vec& b = sequence[k - 1];
        const Vec& c = sequence[k];
        Vec e(c.size());
        for (int i = 0; i < c.size(); ++i) {
            const double d1 = c(i) - b(i);
            const double d2 = c(i) - 2.0 * b(i) + a(i);
            const double richardson = 2.0 * c(i) - b(i);
            if (std::abs(d2) <= 1e-14 * (1.0 + std::abs(c(i)))) {
                e(i) = std::abs(d1) <= 1e-14 * (1.0 + std::abs(c(i))) ? c(i) : richardson;
                continue;
            }
            const double aitken = c(i) - d1 * d1 / d2;
            e(i) = std::abs(aitken - c(i)) <= 4.0 * std::abs(d1) ? aitken : richardson;
        }
        out.extrapolants.push_back(e);
    }
    if (out.extrapolants.empty()) {
        if (!sequence.empty()) out.limit = sequence.back();
        out.spread = std::numeric_limits<double>::infinity();
        return out;
    }
    out.limit = out.extrapolants.back();
    if (out.extrapolants.size() >= 3) {
        const std::size_t m = out.extrapolants.size();
        for (std::size_t i = m - 3; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                out.spread = std::max(out.spread, (out.extrapolants[i] - out.extrapolants[j]).norm());
            }
        }
        out.converged = out.spread <= tol;
    } else {
        out.spread = std::numeric_limits<double>::infinity();
    }
    return out;
}

RegularizationSweep convergence_sweep(const DiscountedSolution& solution, const TonelliLagrangian& lagrangian,
                                      const std::vector<double>& t_grid, const std::vector<Vec>& probe_points,
                                      const LasryLionsOptions& options) {
    require_t_grid(t_grid);
    RegularizationSweep sweep;
    sweep.lambda = solution.lambda;
    sweep.t_grid = t_grid;
    LasryLionsOptions local = options;
    for (double t : t_grid) {
        sweep.steps.push_back(intrinsic_regularize(solution, lagrangian, t, probe_points, local));
        if (local.full_field && !local.lax.output) local.lax.output = sweep.steps.front().value.spec();
    }
    if (options.full_field) {
        for (std::size_t k = 1; k < sweep.steps.size(); ++k) {
            if (sweep.steps[k].sup_error > sweep.steps[k - 1].sup_error) sweep.monotone = false;
        }
    }
    for (std::size_t i = 0; i < probe_points.size(); ++i) {
        ProbeSequence seq;
        seq.x = probe_points[i];
        std::vector<Vec> grads, vels;
        for (std::size_t k = 0; k < t_grid.size(); ++k) {
            const LaxPoint& p = sweep.steps[k].probes[i];
            seq.gradients.push_back(p.gradient);
            std::optional<Vec> v;
            if (p.record.unique) v = Vec((p.record.maximizers.front() - seq.x) / t_grid[k]);
            seq.velocities.push_back(v);
            if (p.gradient) grads.push_back(*p.gradient);
            if (v) vels.push_back(*v);
        }
        seq.gradient_limit = extrapolate(grads, options.cauchy_tol);
        seq.velocity_limit = extrapolate(vels, options.cauchy_tol);
        sweep.probes.push_back(std::move(seq));
    }
    return sweep;
}

nlohmann::json RegularizationSweep::to_json() const {
    nlohmann::json j;
    j["lambda"] = lambda;
    j["t_grid"] = t_grid;
    j["monotone"] = monotone;
    j["steps"] = nlohmann::json::array();
    for (const Regularization& s : steps) {
        j["steps"].push_back({{"t", s.t},
                              {"sup_error", s.sup_error},
                              {"gradient_lipschitz", s.gradient_lipschitz},
                              {"kappa0", s.kappa0}});
    }
    j["probes"] = nlohmann::json::array();
    for (const ProbeSequence& p : probes) {
        nlohmann::json q;
        q["x"] = as_array(p.x);
        q["gradients"] = nlohmann::json::array();
        q["velocities"] = nlohmann::json::array();
        for (const auto& g : p.gradients) q["gradients"].push_back(optional_array(g));
        for (const auto& v : p.velocities) q["velocities"].push_back(optional_array(v));
        q["gradient_limit"] = extrapolation_json(p.gradient_limit);
        q["velocity_limit"] = extrapolation_json(p.velocity_limit);
        j["probes"].push_back(std::move(q));
    }
    return j;
}

void RegularizationSweep::write_errors_csv(std::ostream& out) const {
    out << "t,sup_error,gradient_lipschitz,kappa0\n" << std::setprecision(17);
    for (const Regularization& s : steps) {
        out << s.t << ',' << s.sup_error << ',' << s.gradient_lipschitz << ',' << s.kappa0 << '\n';
    }
}

GradientLimitComparison gradient_limit_vs_qx(const RegularizationSweep& sweep, const Hamiltonian& hamiltonian,
                                             const GridFunction& u, const Vec& x,
                                             const LasryLionsOptions& options) {
    const auto it = std::find_if(sweep.probes.begin(), sweep.probes.end(),
                                 [&](const ProbeSequence& p) { return (p.x - x).norm() <= 1e-12; });
    if (it == sweep.probes.end()) throw Error(ErrorKind::kInvalidArgument, "x is not a probe point of the sweep");
    const double h = u.spec().min_spacing();
    GradientLimitComparison out;
    out.x = x;
    out.limit = it->gradient_limit.limit;
    out.superdiff = superdifferential(u, x, options.regularity.radius_factor * h,
                                      options.regularity.cluster_factor * h, options.regularity);
    out.q = min_H_over_superdiff(hamiltonian, 0.0, x, out.superdiff);
    out.distance = out.limit ? (*out.limit - out.q.q).norm() : std::numeric_limits<double>::infinity();
    return out;
}

nlohmann::json GradientLimitComparison::to_json() const {
    nlohmann::json j;
    j["x"] = as_array(x);
    j["limit"] = optional_array(limit);
    j["q"] = as_array(q.q);
    j["H_min"] = q.value;
    j["distance"] = distance;
    j["superdifferential"] = superdiff.to_json();
    return j;
}

ConcavityWindow strict_concavity_window(const DiscountedSolution& solution, const TonelliLagrangian& lagrangian,
                                        const Vec& x0, const std::vector<double>& t_grid,
                                        const LasryLionsOptions& options) {
    require_t_grid(t_grid);
    const GridFunction& u = solution.u;
    const double h = u.spec().min_spacing();
    ConcavityWindow out;

    // t1: unique maximizers from the smallest t upward.
    const auto kernel = lifted_kernel(solution, lagrangian, t_grid.front(), options);
    std::vector<char> unique(t_grid.size(), 0);
    parallel_for(t_grid.size(), [&](std::size_t k) {
        unique[k] = lax_plus_at(u, *kernel, 0.0, t_grid[k], x0, options.lax).record.unique ? 1 : 0;
    });
    for (std::size_t k = t_grid.size(); k-- > 0;) {
        if (!unique[k]) break;
        out.t1 = t_grid[k];
    }

    // C2 away from detected singular nodes near x0.
    const Vec r = Vec::Constant(x0.size(), options.concavity_radius);
    const auto masked = singular_set(u, options.singular_factor * h, options.regularity);
    out.c2 = std::max(0.0, semiconcavity_constant(u, x0 - r, x0 + r, masked).constant);

    std::vector<double> horizons(t_grid.rbegin(), t_grid.rend());
    ProbeOptions probe;
    probe.samples = options.convexity_samples * static_cast<int>(horizons.size());
    probe.action = options.lax.action;
    const auto lifted = discount_lift(lagrangian, solution.lambda, 2.0 * t_grid.front());
    out.convexity = probe_convexity(lifted, x0, 0.0, 1.0, horizons, probe);
    for (const auto& [horizon, c] : out.convexity.tables.at("C'''_by_T")) {
        if (!(c / horizon > out.c2) || horizon > out.t1) break;
        out.t2 = horizon;
    }
    return out;
}

SingularTrace trace_singularity(const DiscountedSolution& solution, const TonelliLagrangian& lagrangian,
                                const Hamiltonian& hamiltonian, const Vec& x0, const std::vector<double>& t_grid,
                                const LasryLionsOptions& options) {
    require_t_grid(t_grid);
    const GridFunction& u = solution.u;
    const double h = u.spec().min_spacing();
    const double radius = options.regularity.radius_factor * h;
    const double cluster = options.regularity.cluster_factor * h;
    const double threshold = options.singular_factor * h;

    SingularTrace trace;
    trace.x0 = x0;
    trace.t_grid = t_grid;
    trace.superdiff = superdifferential(u, x0, radius, cluster, options.regularity);
    if (!(trace.superdiff.diameter > threshold)) {
        throw Error(ErrorKind::kNotSingular, "superdifferential at x0 is below the singularity threshold");
    }
    trace.q = min_H_over_superdiff(hamiltonian, 0.0, x0, trace.superdiff);
    trace.v0 = hamiltonian.grad_p(0.0, x0, trace.q.q);

    const auto kernel = lifted_kernel(solution, lagrangian, t_grid.front(), options);
    const std::size_t m = t_grid.size();
    std::vector<LaxPoint> points(m);
    trace.diameters.assign(m, 0.0);
    parallel_for(m, [&](std::size_t k) {
        points[k] = lax_plus_at(u, *kernel, 0.0, t_grid[k], x0, options.lax);
        try {
            trace.diameters[k] =
                superdifferential(u, points[k].record.maximizers.front(), radius, cluster, options.regularity)
                    .diameter;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::kInsufficientSamples) throw;
        }
    });
    std::vector<Vec> slopes;
    for (std::size_t k = 0; k < m; ++k) {
        const Vec& y = points[k].record.maximizers.front();
        trace.records.push_back(points[k].record);
        trace.maximizers.push_back(y);
        trace.singular.push_back(trace.diameters[k] > threshold);
        trace.kappa0.push_back(points[k].kappa0);
        for (const Vec& z : points[k].record.maximizers) {
            if ((z - x0).norm() > points[k].kappa0 * t_grid[k] * (1.0 + 1e-12)) trace.localized = false;
        }
        slopes.push_back((y - x0) / t_grid[k]);
    }
    trace.right_derivative = extrapolate(slopes, options.cauchy_tol);
    trace.window = strict_concavity_window(solution, lagrangian, x0, t_grid, options);
    for (std::size_t k = 0; k + 1 < m; ++k) {
        if (t_grid[k] > trace.window.t1) continue;
        trace.max_jump = std::max(trace.max_jump, (trace.maximizers[k] - trace.maximizers[k + 1]).norm());
    }
    return trace;
}

nlohmann::json SingularTrace::to_json() const {
    nlohmann::json j;
    j["x0"] = as_array(x0);
    j["t_grid"] = t_grid;
    j["maximizers"] = nlohmann::json::array();
    for (const Vec& y : maximizers) j["maximizers"].push_back(as_array(y));
    j["diameters"] = diameters;
    j["singular"] = singular;
    j["kappa0"] = kappa0;
    j["localized"] = localized;
    j["max_jump"] = max_jump;
    j["right_derivative"] = extrapolation_json(right_derivative);
    j["superdifferential"] = superdiff.to_json();
    j["q"] = as_array(q.q);
    j["v0"] = as_array(v0);
    j["t1"] = window.t1;
    j["t2"] = window.t2;
    j["C2"] = window.c2;
    j["convexity"] = window.convexity.to_json();
    return j;
}

void SingularTrace::write_csv(std::ostream& out) const {
    out << 't';
    for (int i = 1; i <= x0.size(); ++i) out << ",y" << i;
    out << ",diameter,singular,unique\n" << std::setprecision(17);
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        out << t_grid[k];
        for (int i = 0; i < x0.size(); ++i) out << ',' << maximizers[k](i);
        out << ',' << diameters[k] << ',' << (singular[k] ? 1 : 0) << ',' << (records[k].unique ? 1 : 0) << '\n';
    }
}

ProbeReport lambda_sweep_problem_probe(const TonelliLagrangian& lagrangian, const Hamiltonian& hamiltonian,
                                       const std::vector<double>& lambda_grid, const std::vector<Vec>& x_points,
                                       const GridSpec& grid, double dt, double tol_fp,
                                       const LasryLionsOptions& options) {
    for (std::size_t k = 1; k < lambda_grid.size(); ++k) {
        if (!(lambda_grid[k] < lambda_grid[k - 1])) {
            throw Error(ErrorKind::kInvalidArgument, "lambda grid must be decreasing");
        }
    }
    ProbeReport report("lambda_sweep");
    const double h = grid.min_spacing();
    const bool constant_potential = lagrangian.quadratic_form().has_value();
    for (double lambda : lambda_grid) {
        const DiscountedSolution sol = solve_discounted(lagrangian, lambda, grid, dt, tol_fp);
        for (std::size_t i = 0; i < x_points.size(); ++i) {
            const std::string key = "q_x" + std::to_string(i);
            const SuperdiffSet set = superdifferential(sol.u, x_points[i], options.regularity.radius_factor * h,
                                                       options.regularity.cluster_factor * h, options.regularity);
            const HMinimum q = min_H_over_superdiff(hamiltonian, 0.0, x_points[i], set);
            for (int c = 0; c < q.q.size(); ++c) {
                report.tables[key + "_" + std::to_string(c)].push_back({lambda, q.q(c)});
            }
            report.tables["diameter_x" + std::to_string(i)].push_back({lambda, set.diameter});
            if (constant_potential) {
                auto [it, inserted] = report.constants.try_emplace("max_distance_to_q_x", q.q.norm());
                if (!inserted) it->second = std::max(it->second, q.q.norm());
            }
            ++report.samples;
        }
    }
    return report;
}

}  // namespace hjreg
