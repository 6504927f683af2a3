#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hjreg/action.hpp"
#include "hjreg/action_probes.hpp"
#include "hjreg/catalog.hpp"
#include "hjreg/discounted.hpp"
#include "hjreg/error.hpp"
#include "hjreg/experiments.hpp"
#include "hjreg/lasrylions.hpp"
#include "hjreg/laxoleinik.hpp"
#include "hjreg/regularity.hpp"
#include "oracles.hpp"

using namespace hjreg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, a, b, c, d);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Every maximizer seen anywhere, with the localization constant reported alongside it.
struct LocalizationLog {
    std::size_t checked = 0;
    double worst_ratio = 0.0;  // max |y - x| / (kappa0 gap)

    void add(const MaximizerRecord& r, double kappa0) {
        for (const Vec& y : r.maximizers) {
            ++checked;
            worst_ratio = std::max(worst_ratio, (y - r.x).norm() / (kappa0 * r.gap));
        }
    }
    void add(const LaxResult& res) {
        for (const auto& r : res.records) add(r, res.kappa0_bound);
    }
    void add(const LaxPoint& p) { add(p.record, p.kappa0); }
};

LocalizationLog g_localization;

TonelliLagrangian mechanical_with(catalog::Potential pot) {
    catalog::MechanicalParams mp;
    mp.potential = pot;
    return catalog::mechanical(mp);
}

Vec random_point(std::mt19937_64& rng, int dim, double lo, double hi) {
    std::uniform_real_distribution<double> unif(lo, hi);
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v(i) = unif(rng);
    return v;
}

Outcome fundamental_oracle() {
    const auto start = std::chrono::steady_clock::now();
    const auto lag = catalog::free_particle(2);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> gap(0.05, 0.5);
    std::uniform_real_distribution<double> s_dist(-1.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const Vec x = random_point(rng, 2, -1.0, 1.0);
        const Vec y = random_point(rng, 2, -1.0, 1.0);
        const double s = s_dist(rng);
        const double t = s + gap(rng);
        const double exact = oracle::free_action(x, y, t - s);
        const double value = minimize_action(lag, s, t, x, y).value;
        worst = std::max(worst, std::abs(value - exact) / exact);
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-6 && elapsed <= 30.0, fmt("max rel err %.2e, %.2f s", worst, elapsed)};
}

Outcome discounted_kernel_oracle() {
    const auto base = catalog::free_particle(1);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> t_dist(0.05, 0.5);
    double worst = 0.0;
    for (double lambda : {0.5, 1.0, 2.0}) {
        const auto lifted = discount_lift(base, lambda, 1.0);
        for (int k = 0; k < 20; ++k) {
            const Vec x = random_point(rng, 1, -1.0, 1.0);
            const Vec y = random_point(rng, 1, -1.0, 1.0);
            const double t = t_dist(rng);
            const double exact = oracle::lifted_free_action(x, y, t, lambda);
            const double value = minimize_action(lifted, 0.0, t, x, y).value;
            worst = std::max(worst, std::abs(value - exact) / exact);
        }
    }
    return {worst <= 1e-6, fmt("max rel err %.2e over lambda in {0.5, 1, 2}", worst)};
}

Outcome gradient_formulas() {
    catalog::MechanicalParams free2;
    free2.dim = 2;
    free2.drift = vec2(0.3, -0.2);
    free2.shift = 0.1;
    struct Case {
        TonelliLagrangian lagrangian;
        double s_lo;
    };
    const std::vector<Case> cases = {
        {catalog::mechanical(free2), -1.0},
        {mechanical_with(catalog::Potential::kCos), -1.0},
        {mechanical_with(catalog::Potential::kDoubleWell), -1.0},
        {catalog::anisotropic_quadratic(vec2(1.0, 2.0), 0.5), -1.0},
        {catalog::cosh_lagrangian(1), -1.0},
        {discount_lift(mechanical_with(catalog::Potential::kCos), 1.0, 1.0), 0.0},
    };
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> gap(0.05, 0.5);
    const double fd = 1e-4;
    double worst = 0.0;
    int converged = 0;
    int attempts = 0;
    while (converged < 50 && attempts < 200) {
        const Case& c = cases[attempts++ % cases.size()];
        const auto& lag = c.lagrangian;
        const int n = lag.dim();
        Vec x = random_point(rng, n, -1.0, 1.0);
        Vec y = random_point(rng, n, -1.0, 1.0);
        while ((y - x).norm() < 0.1) y = random_point(rng, n, -1.0, 1.0);
        const double s = std::uniform_real_distribution<double>(c.s_lo, 0.0)(rng);
        const double t = s + gap(rng);
        FundamentalSolution sol;
        std::pair<Vec, Vec> grads;
        try {
            sol = minimize_action(lag, s, t, x, y);
            grads = gradients_A(sol);
        } catch (const Error&) {
            continue;
        }
        ++converged;
        Vec fd_x(n);
        Vec fd_y(n);
        for (int i = 0; i < n; ++i) {
            Vec e = Vec::Zero(n);
            e(i) = fd;
            fd_x(i) = (minimize_action(lag, s, t, x + e, y).value - minimize_action(lag, s, t, x - e, y).value) /
                      (2.0 * fd);
            fd_y(i) = (minimize_action(lag, s, t, x, y + e).value - minimize_action(lag, s, t, x, y - e).value) /
                      (2.0 * fd);
        }
        worst = std::max(worst, (grads.first - fd_x).norm() / fd_x.norm());
        worst = std::max(worst, (grads.second - fd_y).norm() / fd_y.norm());
    }
    return {converged == 50 && worst <= 1e-3,
            fmt("%.0f converged instances, max rel err %.2e", converged, worst)};
}

Outcome appendix_inequalities() {
    struct Entry {
        std::string name;
        TonelliLagrangian lagrangian;
    };
    const std::vector<Entry> entries = {
        {"free", catalog::free_particle(1)},
        {"cos", mechanical_with(catalog::Potential::kCos)},
        {"double_well", mechanical_with(catalog::Potential::kDoubleWell)},
        {"anisotropic", catalog::anisotropic_quadratic(vec2(1.0, 2.0), 0.5)},
        {"cosh", catalog::cosh_lagrangian(1)},
    };
    ProbeOptions po;
    const std::vector<double> horizons = {0.1, 0.2, 0.4};
    std::size_t violations = 0;
    std::string failing;
    double free_dev = 0.0;
    for (const auto& e : entries) {
        const Vec x = Vec::Zero(e.lagrangian.dim());
        const auto velocity = probe_velocity_bounds(e.lagrangian, x, 1.0, {{0.0, 0.25}, {0.0, 0.5}, {0.0, 1.0}}, po);
        const auto containment = probe_compact_containment(e.lagrangian, x, 0.5, 0.0, 0.5, po);
        const auto semiconcavity = probe_semiconcavity(e.lagrangian, x, 0.0, horizons, 1.0, po);
        const auto convexity = probe_convexity(e.lagrangian, x, 0.0, 1.0, horizons, po);
        for (const ProbeReport* r : {&velocity, &containment, &semiconcavity, &convexity}) {
            if (!r->ok()) {
                violations += r->violations.size();
                failing += " " + e.name + "/" + r->probe;
            }
        }
        if (e.name == "free") {
            free_dev = std::max(free_dev, std::abs(semiconcavity.constant("C_lambda") - 1.0));
            free_dev = std::max(free_dev, std::abs(convexity.constant("C'''_lambda") - 1.0));
            for (const auto& [r, kappa] : velocity.tables.at("kappa_T")) {
                free_dev = std::max(free_dev, std::abs(kappa - r));
            }
        }
    }
    Outcome out{violations == 0 && free_dev <= 1e-6,
                fmt("%.0f violations, free-particle constant deviation %.2e", static_cast<double>(violations),
                    free_dev)};
    if (!failing.empty()) out.detail += ";" + failing;
    return out;
}

GridFunction neg_abs_line(int count) {
    return GridFunction::sample(GridSpec::box(vec1(-3.0), vec1(3.0), {count, 1, 1}),
                                [](const Vec& x) { return -std::abs(x(0)); });
}

Outcome moreau_oracle() {
    const auto u = neg_abs_line(2001);
    const auto kernel = make_kernel(catalog::free_particle(1));
    double worst = 0.0;
    for (double tau : {0.1, 0.2, 0.4}) {
        const auto res = lax_plus(u, *kernel, 0.0, tau);
        g_localization.add(res);
        for (std::size_t i = 0; i < res.value.size(); ++i) {
            worst = std::max(worst, std::abs(res.value[i] - oracle::moreau_neg_abs(res.value.node(i)(0), tau)));
        }
    }
    return {worst <= 1e-4, fmt("sup err %.2e on 2001 nodes", worst)};
}

Outcome localization() {
    const auto u = neg_abs_line(2001);
    const auto kernel = make_kernel(catalog::free_particle(1));
    std::vector<Vec> points;
    for (int k = 0; k < 9; ++k) points.push_back(vec1(-1.0 + 0.25 * k));
    const auto report = estimate_kappa0(u, *kernel, 0.0, {0.4, 0.2, 0.1}, points);
    const double k0 = report.constant("kappa0");
    const double ratio = report.constant("kappa0_scaled") / k0;
    const bool all_inside = g_localization.worst_ratio <= 1.0 + 1e-12;
    return {all_inside && report.ok() && std::abs(k0 - 1.0) <= 0.05 && std::abs(ratio - 2.0) <= 0.2,
            fmt("%.0f maximizers, worst |y-x|/(kappa0 gap) %.4f; kappa0 %.4f, scaled ratio %.4f",
                static_cast<double>(g_localization.checked), g_localization.worst_ratio, k0, ratio)};
}

GridSpec circle(int count) {
    return GridSpec::box(vec1(0.0), vec1(2.0 * M_PI), {count, 1, 1}, BoundaryPolicy::kPeriodic);
}

struct CosCase {
    double lambda = 0.5;
    DiscountedSolution coarse;
    DiscountedSolution fine;
};

const CosCase& cos_case() {
    static const CosCase c = [] {
        CosCase out;
        const auto lag = mechanical_with(catalog::Potential::kCos);
        const auto g = circle(256);
        const auto f = circle(1024);
        out.coarse = solve_discounted(lag, out.lambda, g, 4.0 * g.spacing(0), 1e-9);
        out.fine = solve_discounted(lag, out.lambda, f, 4.0 * f.spacing(0), 1e-9);
        return out;
    }();
    return c;
}

Outcome discounted_solver() {
    const double a = 0.7;
    const double lambda = 0.5;
    catalog::MechanicalParams mp;
    mp.shift = a;
    const auto g = circle(64);
    const auto constant = solve_discounted(catalog::mechanical(mp), lambda, g, 4.0 * g.spacing(0), 1e-10);
    double exact_err = 0.0;
    for (double v : constant.u.values()) exact_err = std::max(exact_err, std::abs(v - a / lambda));

    const auto& c = cos_case();
    const double ref_err = oracle::sup_distance_on_nodes(c.coarse.u, c.fine.u);
    const double expected = std::exp(-c.lambda * c.coarse.dt);
    const double contraction = std::abs(c.coarse.measured_contraction / expected - 1.0);
    return {exact_err <= 1e-8 && ref_err <= 2e-3 && contraction <= 0.05,
            fmt("constant err %.2e; cos vs 4x reference %.2e; contraction %.6f vs %.6f", exact_err, ref_err,
                c.coarse.measured_contraction, expected)};
}

Outcome equivalence_lift() {
    const auto& c = cos_case();
    const double t = 0.25;
    const auto lifted = discount_lift(mechanical_with(catalog::Potential::kCos), c.lambda, t);
    const auto res = lax_minus(c.coarse.u, lifted, 0.0, t);
    g_localization.add(res);
    double worst = 0.0;
    for (std::size_t i = 0; i < res.value.size(); ++i) {
        const double target = std::exp(c.lambda * t) * c.coarse.u(res.value.node(i));
        worst = std::max(worst, std::abs(res.value[i] - target));
    }
    return {worst <= 5e-3, fmt("sup |T- u - e^{lambda t} u| = %.2e", worst)};
}

struct DoubleWell {
    TonelliLagrangian lagrangian = mechanical_with(catalog::Potential::kDoubleWell);
    Hamiltonian hamiltonian = catalog::mechanical_hamiltonian([] {
        catalog::MechanicalParams mp;
        mp.potential = catalog::Potential::kDoubleWell;
        return mp;
    }());
    DiscountedSolution solution;
    std::vector<double> t_grid;
    Vec ridge;
    std::vector<Vec> smooth;
    double h = 0.0;
};

const DoubleWell& double_well() {
    static const DoubleWell dw = [] {
        DoubleWell out;
        const auto grid = GridSpec::box(vec1(-2.0), vec1(2.0), {201, 1, 1});
        out.h = grid.spacing(0);
        out.solution = solve_discounted(out.lagrangian, 0.5, grid, out.h, 1e-9);
        for (int k = 0; k <= 5; ++k) out.t_grid.push_back(0.2 * std::pow(2.0, -k));
        // The ridge is the top of u between the wells.
        std::size_t top = grid.size() / 2;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (std::abs(grid.node(i)(0)) < 0.9 && out.solution.u[i] > out.solution.u[top]) top = i;
        }
        out.ridge = grid.node(top);
        for (double x : {-0.5, -0.375, -0.25, -0.125, 0.125, 0.25, 0.375, 0.5}) {
            const double snapped = std::round(x / out.h) * out.h;
            out.smooth.push_back(vec1(snapped));
        }
        return out;
    }();
    return dw;
}

const RegularizationSweep& double_well_sweep() {
    static const RegularizationSweep sweep = [] {
        const auto& dw = double_well();
        std::vector<Vec> probes = {dw.ridge};
        probes.insert(probes.end(), dw.smooth.begin(), dw.smooth.end());
        return convergence_sweep(dw.solution, dw.lagrangian, dw.t_grid, probes);
    }();
    return sweep;
}

Outcome regularization_convergence() {
    const auto& dw = double_well();
    const auto& sweep = double_well_sweep();
    std::vector<double> errors;
    for (const auto& step : sweep.steps) {
        double e = 0.0;
        for (std::size_t i = 0; i < step.value.size(); ++i) {
            e = std::max(e, std::abs(step.value[i] - dw.solution.u(step.value.node(i))));
        }
        errors.push_back(e);
        for (const auto& r : step.probes) g_localization.add(r);
    }
    bool decreasing = errors.size() == 6;
    for (std::size_t k = 1; k < errors.size(); ++k) decreasing = decreasing && errors[k] < errors[k - 1];
    const double interp = oracle::interpolation_error(dw.solution.u);
    const double last = errors.empty() ? INFINITY : errors.back();
    std::ostringstream detail;
    detail << "errors";
    for (double e : errors) detail << ' ' << fmt("%.3e", e);
    detail << "; final/interp " << fmt("%.3f", last / interp);
    return {decreasing && last <= 4.0 * interp, detail.str()};
}

Outcome gradient_limits() {
    const auto& dw = double_well();
    const auto& sweep = double_well_sweep();
    const double radius = 6.0 * dw.h;
    const double cluster = 10.0 * dw.h;
    double worst = 0.0;
    double worst_bf = 0.0;
    int compared = 0;
    for (const auto& probe : sweep.probes) {
        if (!probe.gradient_limit.limit) continue;
        const auto set = superdifferential(dw.solution.u, probe.x, radius, cluster);
        const auto q = min_H_over_superdiff(dw.hamiltonian, 0.0, probe.x, set);
        const Vec bf = oracle::brute_force_polytope_min(
            [&](const Vec& p) { return dw.hamiltonian.eval(0.0, probe.x, p); }, set.hull);
        worst = std::max(worst, (*probe.gradient_limit.limit - q.q).norm());
        worst_bf = std::max(worst_bf, (bf - q.q).norm());
        ++compared;
    }
    return {compared == 9 && worst <= 3.0 * dw.h && worst_bf <= 1e-6,
            fmt("%.0f probes, max |lim Du_t - q| %.3e (3h = %.3e), brute-force gap %.2e", compared, worst,
                3.0 * dw.h, worst_bf)};
}

Outcome singularity_propagation() {
    const auto& dw = double_well();
    const auto trace = trace_singularity(dw.solution, dw.lagrangian, dw.hamiltonian, dw.ridge, dw.t_grid);
    for (const auto& r : trace.records) {
        g_localization.add(r, *std::max_element(trace.kappa0.begin(), trace.kappa0.end()));
    }
    const double t2 = trace.window.t2;
    bool all_singular = t2 > 0.0;
    double jump = 0.0;
    for (std::size_t k = 0; k < dw.t_grid.size(); ++k) {
        if (dw.t_grid[k] > t2) continue;
        all_singular = all_singular && trace.singular[k];
        if (k + 1 < dw.t_grid.size()) jump = std::max(jump, (trace.maximizers[k] - trace.maximizers[k + 1]).norm());
    }
    const double tol = 2.0 * dw.h;
    const double rd = trace.right_derivative.limit ? (*trace.right_derivative.limit)(0) : INFINITY;
    const double v0 = trace.v0(0);
    const double q = trace.q.q(0);
    const bool derivative_ok = std::abs(rd) <= tol && std::abs(rd - v0) <= tol && std::abs(rd - q) <= tol &&
                               std::abs(v0 - q) <= tol;
    return {all_singular && jump <= tol && derivative_ok,
            fmt("t2 %.4f, max jump %.2e, right derivative %.2e, v0 %.2e", t2, jump, rd, v0) +
                fmt(", q %.2e", q)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Outcome determinism(const fs::path& runs) {
    std::string mismatched;
    std::size_t files = 0;
    for (experiments::Kind kind : experiments::all_kinds()) {
        const std::string name = experiments::to_string(kind);
        const auto config = experiments::default_config(kind);
        const fs::path a = runs / name / "a";
        const fs::path b = runs / name / "b";
        fs::remove_all(a);
        fs::remove_all(b);
        const auto ra = experiments::run(kind, config, a);
        const auto rb = experiments::run(kind, config, b);
        std::vector<std::string> names = ra.artifacts;
        names.push_back("manifest.json");
        if (ra.artifacts != rb.artifacts) mismatched += " " + name + "/artifact-list";
        for (const auto& file : names) {
            ++files;
            if (slurp(a / file) != slurp(b / file)) mismatched += " " + name + "/" + file;
        }
    }
    Outcome out{mismatched.empty(), fmt("%.0f files compared across 7 experiments", static_cast<double>(files))};
    if (!mismatched.empty()) out.detail += "; differing:" + mismatched;
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path runs = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "hjreg_acceptance";
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    // Localization (6) runs last so it sees the maximizers of every other criterion.
    const std::vector<Criterion> criteria = {
        {1, "fundamental-solution oracle", fundamental_oracle},
        {2, "discounted-kernel oracle", discounted_kernel_oracle},
        {3, "endpoint gradient formulas", gradient_formulas},
        {4, "appendix inequality suite", appendix_inequalities},
        {5, "Moreau oracle", moreau_oracle},
        {7, "discounted solver", discounted_solver},
        {8, "equivalence lift", equivalence_lift},
        {9, "regularization convergence", regularization_convergence},
        {10, "gradient limit", gradient_limits},
        {11, "singularity propagation", singularity_propagation},
        {12, "determinism", [&] { return determinism(runs); }},
        {6, "localization", localization},
    };
    std::map<int, bool> passed;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("threw ") + e.what()};
        }
        passed[c.id] = out.pass;
        std::printf("[%s] %2d %s: %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(),
                    seconds_since(start));
        std::fflush(stdout);
    }
    int failures = 0;
    for (const auto& [id, ok] : passed) failures += ok ? 0 : 1;
    std::printf("%d/%zu criteria passed\n", static_cast<int>(passed.size()) - failures, passed.size());
    return failures == 0 ? 0 : 1;
}
