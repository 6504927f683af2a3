#include "hjreg/experiments.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "hjreg/action.hpp"
#include "hjreg/action_probes.hpp"
#include "hjreg/catalog.hpp"
#include "hjreg/discounted.hpp"
#include "hjreg/kernel.hpp"
#include "hjreg/lasrylions.hpp"
#include "hjreg/laxoleinik.hpp"
#include "hjreg/parallel.hpp"
#include "hjreg/regularity.hpp"

#ifndef HJREG_VERSION
#define HJREG_VERSION "unknown"
#endif

namespace hjreg::experiments {

using nlohmann::json;

namespace {

constexpr double kPi = 3.141592653589793;

const std::vector<std::pair<Kind, std::string>>& kind_names() {
    static const std::vector<std::pair<Kind, std::string>> names{
        {Kind::kFundamental, "fundamental"}, {Kind::kOperators, "operators"},
        {Kind::kDiscounted, "discounted"},   {Kind::kRegularize, "regularize"},
        {Kind::kSingularity, "singularity"}, {Kind::kPropcheck, "propcheck"},
        {Kind::kLambdaSweep, "lambda-sweep"}};
    return names;
}

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::kConfigError, what); }

json grid_json(std::vector<double> lo, std::vector<double> hi, std::vector<int> counts, const std::string& boundary) {
    return {{"lo", lo}, {"hi", hi}, {"counts", counts}, {"boundary", boundary}};
}

json lagrangian_json(const std::string& key, json params) { return {{"key", key}, {"params", std::move(params)}}; }

json t_grid_json(double max, double ratio, int count) { return {{"max", max}, {"ratio", ratio}, {"count", count}}; }

Vec to_vec(const json& j) {
    if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxDim)) {
        config_error("expected an array of 1 to 3 numbers");
    }
    Vec v(static_cast<int>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
    return v;
}

GridSpec grid_from(const json& g) {
    const Vec lo = to_vec(g.at("lo"));
    const Vec hi = to_vec(g.at("hi"));
    const auto& counts = g.at("counts");
    if (hi.size() != lo.size() || counts.size() != static_cast<std::size_t>(lo.size())) {
        config_error("grid lo, hi and counts must have equal lengths");
    }
    std::array<int, kMaxDim> c{1, 1, 1};
    for (std::size_t i = 0; i < counts.size(); ++i) c[i] = counts[i].get<int>();
    const std::string boundary = g.at("boundary").get<std::string>();
    BoundaryPolicy policy;
    if (boundary == "constant") {
        policy = BoundaryPolicy::kConstantExtend;
    } else if (boundary == "periodic") {
        policy = BoundaryPolicy::kPeriodic;
    } else {
        config_error("grid.boundary must be 'constant' or 'periodic'");
    }
    return GridSpec::box(lo, hi, c, policy);
}

std::vector<double> t_grid_from(const json& j) {
    std::vector<double> out;
    const double max = j.at("max").get<double>();
    const double ratio = j.at("ratio").get<double>();
    for (int k = 0; k < j.at("count").get<int>(); ++k) out.push_back(max * std::pow(ratio, k));
    return out;
}

catalog::Entry entry_from(const json& j) {
    return catalog::from_config(j.at("key").get<std::string>(), j.at("params"));
}

double tol(const json& config, const std::string& key) { return config.at("tol").at(key).get<double>(); }

ActionOptions action_options(const json& config) {
    ActionOptions o;
    o.tol = tol(config, "action");
    o.seed = config.at("seed").get<std::uint64_t>();
    return o;
}

LaxOptions lax_options(const json& config) {
    LaxOptions o;
    o.value_tol = tol(config, "value");
    o.action = action_options(config);
    return o;
}

/// True for the free particle without drift or shift.
bool plain_free(const json& lagrangian) {
    if (lagrangian.at("key") != "free") return false;
    const json& p = lagrangian.at("params");
    if (p.contains("shift") && p.at("shift").get<double>() != 0.0) return false;
    if (p.contains("drift")) {
        for (const auto& d : p.at("drift")) {
            if (d.get<double>() != 0.0) return false;
        }
    }
    return true;
}

/// Collects artifact paths and writes CSV/JSON files.
class Writer {
public:
    explicit Writer(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::ofstream open(const std::string& name) {
        artifacts_.push_back(name);
        std::ofstream out(dir_ / name);
        if (!out) throw Error(ErrorKind::kConfigError, "cannot write " + (dir_ / name).string());
        out << std::setprecision(17);
        return out;
    }
    void write_json(const std::string& name, const json& j) { open(name) << j.dump(2) << '\n'; }
    [[nodiscard]] const std::vector<std::string>& artifacts() const { return artifacts_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> artifacts_;
};

using Checks = std::map<std::string, bool>;

// ---------------------------------------------------------------- fundamental

struct CatalogCase {
    std::string label;
    json lagrangian;
};

std::vector<CatalogCase> builtin_catalog() {
    return {{"free", lagrangian_json("free", {{"dim", 1}})},
            {"cos", lagrangian_json("mechanical", {{"potential", "cos"}})},
            {"double_well", lagrangian_json("mechanical", {{"potential", "double_well"}})},
            {"anisotropic", lagrangian_json("anisotropic", {{"dim", 2}})},
            {"cosh", lagrangian_json("cosh", {{"dim", 1}})},
            {"cos_drift_2d",
             lagrangian_json("mechanical", {{"dim", 2}, {"potential", "cos"}, {"drift", {0.3, -0.2}}})}};
}

void run_fundamental(const json& config, Writer& writer, Checks& checks) {
    std::vector<CatalogCase> cases;
    if (config.at("catalog").get<bool>()) {
        cases = builtin_catalog();
    } else {
        cases.push_back({config.at("lagrangian").at("key").get<std::string>(), config.at("lagrangian")});
    }
    std::vector<double> lambdas = config.at("lambdas").get<std::vector<double>>();
    const bool lifted = !lambdas.empty();
    if (!lifted) lambdas.push_back(0.0);
    const int samples = config.at("samples").get<int>();
    const auto span = config.at("span").get<std::vector<double>>();
    const double radius = config.at("radius").get<double>();
    const bool gradient_check = config.at("gradient_check").get<bool>();
    const double fd = config.at("fd_step").get<double>();
    const ActionOptions opts = action_options(config);

    struct Job {
        std::size_t case_index;
        double lambda, s, t;
        Vec x, y;
    };
    std::mt19937_64 rng(config.at("seed").get<std::uint64_t>());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Job> jobs;
    for (double lambda : lambdas) {
        for (int k = 0; k < samples; ++k) {
            Job job;
            job.case_index = static_cast<std::size_t>(k) % cases.size();
            const int dim = entry_from(cases[job.case_index].lagrangian).lagrangian.dim();
            job.lambda = lambda;
            job.s = lifted ? 0.0 : unit(rng);
            job.t = job.s + span[0] + (span[1] - span[0]) * unit(rng);
            job.x = Vec(dim);
            job.y = Vec(dim);
            for (int i = 0; i < dim; ++i) job.x(i) = radius * (2.0 * unit(rng) - 1.0);
            for (int i = 0; i < dim; ++i) job.y(i) = radius * (2.0 * unit(rng) - 1.0);
            jobs.push_back(job);
        }
    }

    struct Row {
        bool converged = false;
        double value = 0.0;
        double oracle = std::numeric_limits<double>::quiet_NaN();
        double rel_error = std::numeric_limits<double>::quiet_NaN();
        double grad_error = std::numeric_limits<double>::quiet_NaN();
        double residual = 0.0;
    };
    std::vector<Row> rows(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        const Job& job = jobs[i];
        TonelliLagrangian l = entry_from(cases[job.case_index].lagrangian).lagrangian;
        if (lifted) l = discount_lift(l, job.lambda, job.t);
        Row row;
        try {
            const FundamentalSolution fs = minimize_action(l, job.s, job.t, job.x, job.y, opts);
            row.converged = true;
            row.value = fs.value;
            row.residual = fs.residual;
            if (l.quadratic_form()) {
                row.oracle = QuadraticKernel(l).evaluate(job.s, job.t, job.x, job.y).value;
                row.rel_error = std::abs(fs.value - row.oracle) / std::max(std::abs(row.oracle), 1e-12);
            }
            if (gradient_check) {
                const int n = static_cast<int>(job.x.size());
                Vec gx(n), gy(n);
                for (int c = 0; c < n; ++c) {
                    Vec e = Vec::Zero(n);
                    e(c) = fd;
                    gx(c) = (minimize_action(l, job.s, job.t, job.x + e, job.y, opts).value -
                             minimize_action(l, job.s, job.t, job.x - e, job.y, opts).value) /
                            (2.0 * fd);
                    gy(c) = (minimize_action(l, job.s, job.t, job.x, job.y + e, opts).value -
                             minimize_action(l, job.s, job.t, job.x, job.y - e, opts).value) /
                            (2.0 * fd);
                }
                const double ex = (gx - fs.grad_x).norm() / std::max(fs.grad_x.norm(), 1.0);
                const double ey = (gy - fs.grad_y).norm() / std::max(fs.grad_y.norm(), 1.0);
                row.grad_error = std::max(ex, ey);
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::kNoConvergence) throw;
        }
        rows[i] = row;
    });

    auto csv = writer.open("fundamental.csv");
    csv << "index,case,lambda,s,t,x,y,value,oracle,rel_error,grad_error,converged\n";
    double max_rel = 0.0, max_grad = 0.0;
    int converged = 0;
    bool has_oracle = false;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const Job& job = jobs[i];
        const Row& r = rows[i];
        auto join = [](const Vec& v) {
            std::ostringstream s;
            s << std::setprecision(17);
            for (int c = 0; c < v.size(); ++c) s << (c ? ";" : "") << v(c);
            return s.str();
        };
        csv << i << ',' << cases[job.case_index].label << ',' << job.lambda << ',' << job.s << ',' << job.t << ','
            << join(job.x) << ',' << join(job.y) << ',' << r.value << ',' << r.oracle << ',' << r.rel_error << ','
            << r.grad_error << ',' << (r.converged ? 1 : 0) << '\n';
        if (!r.converged) continue;
        ++converged;
        if (std::isfinite(r.rel_error)) {
            has_oracle = true;
            max_rel = std::max(max_rel, r.rel_error);
        }
        if (std::isfinite(r.grad_error)) max_grad = std::max(max_grad, r.grad_error);
    }
    json report{{"samples", jobs.size()}, {"converged", converged}, {"lifted", lifted}, {"lambdas", lambdas}};
    if (has_oracle) {
        report["max_rel_error"] = max_rel;
        checks["oracle"] = max_rel <= tol(config, "oracle");
    }
    if (gradient_check) {
        report["max_gradient_error"] = max_grad;
        checks["gradients"] = max_grad <= tol(config, "gradient");
    }
    writer.write_json("fundamental.json", report);
}

// ---------------------------------------------------------------- operators

GridFunction initial_field(const GridSpec& spec, const std::string& name, double scale) {
    std::function<double(const Vec&)> f;
    if (name == "neg_abs") {
        f = [](const Vec& x) { return -x.norm(); };
    } else if (name == "abs") {
        f = [](const Vec& x) { return x.norm(); };
    } else if (name == "zero") {
        f = [](const Vec&) { return 0.0; };
    } else if (name == "neg_quadratic") {
        f = [](const Vec& x) { return -0.5 * x.squaredNorm(); };
    } else if (name == "cos") {
        f = [](const Vec& x) { return x.array().cos().sum(); };
    } else {
        config_error("unknown initial field '" + name + "'");
    }
    return GridFunction::sample(spec, [&](const Vec& x) { return scale * f(x); });
}

/// Moreau envelope of |.| with the sign convention of the operator, when it applies.
std::optional<std::function<double(const Vec&)>> moreau_oracle(const json& config, double tau) {
    const std::string u = config.at("u").get<std::string>();
    const std::string side = config.at("side").get<std::string>();
    if (!plain_free(config.at("lagrangian")) || config.at("u_scale").get<double>() != 1.0) return std::nullopt;
    const double sign = side == "plus" && u == "neg_abs" ? -1.0 : side == "minus" && u == "abs" ? 1.0 : 0.0;
    if (sign == 0.0) return std::nullopt;
    return [sign, tau](const Vec& x) {
        const double r = x.norm();
        return sign * (r <= tau ? r * r / (2.0 * tau) : r - 0.5 * tau);
    };
}

void run_operators(const json& config, Writer& writer, Checks& checks) {
    const catalog::Entry entry = entry_from(config.at("lagrangian"));
    const GridSpec spec = grid_from(config.at("grid"));
    const GridFunction u = initial_field(spec, config.at("u").get<std::string>(), config.at("u_scale").get<double>());
    const LaxOptions opts = lax_options(config);
    const auto kernel = make_kernel(entry.lagrangian, KernelChoice::kAuto, opts.action);
    const bool plus = config.at("side").get<std::string>() == "plus";
    std::vector<double> taus = config.at("taus").get<std::vector<double>>();

    auto csv = writer.open("operators.csv");
    csv << "tau,sup_error,kappa0_bound,kappa0_empirical,boundary_hits,non_unique\n";
    json steps = json::array();
    double worst = 0.0;
    bool has_oracle = false;
    bool localized = true;
    for (std::size_t k = 0; k < taus.size(); ++k) {
        const double tau = taus[k];
        const LaxResult r = plus ? lax_plus(u, *kernel, 0.0, tau, opts) : lax_minus(u, *kernel, 0.0, tau, opts);
        const auto oracle = moreau_oracle(config, tau);
        double err = std::numeric_limits<double>::quiet_NaN();
        if (oracle) {
            err = 0.0;
            for (std::size_t f = 0; f < r.value.size(); ++f) {
                err = std::max(err, std::abs(r.value[f] - (*oracle)(r.value.node(f))));
            }
            worst = std::max(worst, err);
            has_oracle = true;
        }
        int non_unique = 0;
        for (const MaximizerRecord& rec : r.records) non_unique += rec.unique ? 0 : 1;
        if (r.kappa0_empirical > r.kappa0_bound * (1.0 + 1e-12)) localized = false;
        csv << tau << ',' << err << ',' << r.kappa0_bound << ',' << r.kappa0_empirical << ',' << r.boundary_hits
            << ',' << non_unique << '\n';
        steps.push_back({{"tau", tau},
                         {"sup_error", oracle ? json(err) : json(nullptr)},
                         {"kappa0_bound", r.kappa0_bound},
                         {"kappa0_empirical", r.kappa0_empirical},
                         {"boundary_hits", r.boundary_hits},
                         {"non_unique", non_unique}});
        auto field = writer.open("field_tau" + std::to_string(k) + ".csv");
        r.value.write_csv(field);
    }
    json report{{"steps", steps}, {"side", plus ? "plus" : "minus"}};
    checks["localization"] = localized;
    if (has_oracle) {
        report["max_sup_error"] = worst;
        checks["oracle"] = worst <= tol(config, "oracle");
    }

    if (config.at("kappa_probe").get<bool>() && plus) {
        std::vector<double> t_desc = taus;
        std::sort(t_desc.rbegin(), t_desc.rend());
        const int points = config.at("kappa_points").get<int>();
        std::vector<Vec> samples;
        for (int i = 0; i < points; ++i) {
            const double frac = 0.3 + 0.4 * (points > 1 ? static_cast<double>(i) / (points - 1) : 0.5);
            samples.push_back(spec.lo + frac * (spec.hi() - spec.lo));
        }
        const ProbeReport kappa = estimate_kappa0(u, *kernel, 0.0, t_desc, samples, opts);
        writer.write_json("kappa0.json", kappa.to_json());
        checks["kappa0_report"] = kappa.ok();
        if (has_oracle) {
            const double k0 = kappa.constant("kappa0");
            const double ratio = kappa.constant("kappa0_ratio");
            checks["kappa0_unit"] = std::abs(k0 - 1.0) <= tol(config, "kappa");
            checks["kappa0_scaling"] = std::abs(ratio - 2.0) <= 2.0 * tol(config, "scaling");
            report["kappa0"] = k0;
            report["kappa0_ratio"] = ratio;
        }
    }
    writer.write_json("operators.json", report);
}

// ---------------------------------------------------------------- discounted

DiscountedSolution solve_from(const json& config, const TonelliLagrangian& l, const GridSpec& spec,
                              double refine = 1.0) {
    DiscountedOptions o;
    o.max_iterations = config.at("max_iterations").get<int>();
    const double dt = config.at("dt_factor").get<double>() * spec.min_spacing() / refine;
    return solve_discounted(l, config.at("lambda").get<double>(), spec, dt, tol(config, "fixed_point"), o);
}

GridSpec refined(const GridSpec& spec, int factor) {
    std::array<int, kMaxDim> counts = spec.counts;
    for (int i = 0; i < spec.dim(); ++i) {
        counts[i] = spec.boundary == BoundaryPolicy::kPeriodic ? spec.counts[i] * factor
                                                                : (spec.counts[i] - 1) * factor + 1;
    }
    Vec hi = spec.hi();
    if (spec.boundary == BoundaryPolicy::kPeriodic) {
        for (int i = 0; i < spec.dim(); ++i) hi(i) = spec.lo(i) + spec.counts[i] * spec.spacing(i);
    }
    return GridSpec::box(spec.lo, hi, counts, spec.boundary);
}

void run_discounted(const json& config, Writer& writer, Checks& checks) {
    const catalog::Entry entry = entry_from(config.at("lagrangian"));
    const GridSpec spec = grid_from(config.at("grid"));
    const double lambda = config.at("lambda").get<double>();
    const DiscountedSolution sol = solve_from(config, entry.lagrangian, spec);
    auto field = writer.open("u.csv");
    sol.u.write_csv(field);
    json report{{"solution", sol.to_json()}};

    const double rel = std::abs(sol.measured_contraction - sol.contraction_factor) / sol.contraction_factor;
    if (std::isfinite(sol.measured_contraction)) {
        report["contraction_rel_error"] = rel;
        checks["contraction"] = rel <= tol(config, "contraction");
    }

    // Constant stationary solution when H(x, 0) does not depend on x.
    if (entry.lagrangian.quadratic_form()) {
        const Vec zero = Vec::Zero(spec.dim());
        const double exact = -entry.hamiltonian.eval(0.0, spec.node(0), zero) / lambda;
        double err = 0.0;
        for (double v : sol.u.values()) err = std::max(err, std::abs(v - exact));
        report["exact_error"] = err;
        checks["exact"] = err <= tol(config, "exact");
    }

    const int factor = config.at("reference_factor").get<int>();
    if (factor > 1) {
        const DiscountedSolution ref = solve_from(config, entry.lagrangian, refined(spec, factor), factor);
        double err = 0.0;
        for (std::size_t f = 0; f < sol.u.size(); ++f) err = std::max(err, std::abs(sol.u[f] - ref.u(spec.node(f))));
        report["reference_error"] = err;
        report["reference_factor"] = factor;
        checks["reference"] = err <= tol(config, "reference");
    }

    const double lift_t = config.at("lift_t").get<double>();
    if (lift_t > 0.0) {
        const LaxOptions opts = lax_options(config);
        const auto kernel = make_kernel(discount_lift(entry.lagrangian, lambda, lift_t), KernelChoice::kAuto,
                                        opts.action);
        const LaxResult r = lax_minus(sol.u, *kernel, 0.0, lift_t, opts);
        const GridFunction lifted = lift_to_evolution(sol, lift_t);
        double err = 0.0;
        for (std::size_t f = 0; f < r.value.size(); ++f) {
            err = std::max(err, std::abs(r.value[f] - lifted(r.value.node(f))));
        }
        report["lift_error"] = err;
        report["lift_t"] = lift_t;
        checks["lift"] = err <= tol(config, "lift");
    }
    writer.write_json("discounted.json", report);
}

// ---------------------------------------------------------------- regularize / singularity

LasryLionsOptions lasrylions_options(const json& config) {
    LasryLionsOptions o;
    o.lax = lax_options(config);
    o.cauchy_tol = tol(config, "cauchy");
    return o;
}

/// Detected singular nodes plus `smooth` random differentiable nodes, all in
/// the central `region` fraction of the box.
std::vector<Vec> probe_points(const json& config, const GridFunction& u, const std::vector<std::size_t>& singular) {
    const GridSpec& spec = u.spec();
    const double region = config.at("probes").at("region").get<double>();
    const double h = spec.min_spacing();
    const Vec center = 0.5 * (spec.lo + spec.hi());
    const Vec half = 0.5 * region * (spec.hi() - spec.lo);
    auto central = [&](const Vec& x) { return ((x - center).cwiseAbs() - half).maxCoeff() <= 1e-12; };
    std::vector<Vec> out;
    if (config.at("probes").at("singular").get<bool>()) {
        for (std::size_t f : singular) {
            if (central(spec.node(f))) out.push_back(spec.node(f));
        }
    }
    std::vector<std::size_t> smooth;
    RegularityOptions reg;
    for (std::size_t f = 0; f < spec.size(); ++f) {
        const Vec x = spec.node(f);
        if (!central(x) || !is_differentiable_node(u, f, reg)) continue;
        bool far = true;
        for (std::size_t s : singular) {
            if ((spec.node(s) - x).norm() <= reg.radius_factor * h) far = false;
        }
        if (far) smooth.push_back(f);
    }
    std::mt19937_64 rng(config.at("seed").get<std::uint64_t>());
    const int wanted = config.at("probes").at("smooth").get<int>();
    for (int k = 0; k < wanted && !smooth.empty(); ++k) {
        std::uniform_int_distribution<std::size_t> pick(0, smooth.size() - 1);
        const std::size_t i = pick(rng);
        out.push_back(spec.node(smooth[i]));
        smooth.erase(smooth.begin() + static_cast<long>(i));
    }
    return out;
}

void run_regularize(const json& config, Writer& writer, Checks& checks) {
    const catalog::Entry entry = entry_from(config.at("lagrangian"));
    const GridSpec spec = grid_from(config.at("grid"));
    const DiscountedSolution sol = solve_from(config, entry.lagrangian, spec);
    const LasryLionsOptions opts = lasrylions_options(config);
    const double h = spec.min_spacing();
    const auto singular = singular_set(sol.u, opts.singular_factor * h, opts.regularity);
    const auto probes = probe_points(config, sol.u, singular);
    const auto t_grid = t_grid_from(config.at("t_grid"));
    const RegularizationSweep sweep = convergence_sweep(sol, entry.lagrangian, t_grid, probes, opts);
    const double interp = sol.u.interpolation_error();

    auto errors = writer.open("errors.csv");
    sweep.write_errors_csv(errors);
    if (config.at("write_fields").get<bool>()) {
        for (std::size_t k = 0; k < sweep.steps.size(); ++k) {
            auto f = writer.open("regularized_t" + std::to_string(k) + ".csv");
            sweep.steps[k].value.write_csv(f);
        }
    }
    json comparisons = json::array();
    double worst = 0.0;
    for (const Vec& x : probes) {
        const GradientLimitComparison c = gradient_limit_vs_qx(sweep, entry.hamiltonian, sol.u, x, opts);
        comparisons.push_back(c.to_json());
        worst = std::max(worst, c.distance);
    }
    const double last = sweep.steps.back().sup_error;
    json report{{"sweep", sweep.to_json()},
                {"interpolation_error", interp},
                {"final_error", last},
                {"final_to_interpolation", interp > 0.0 ? json(last / interp) : json(nullptr)},
                {"singular_nodes", singular.size()},
                {"comparisons", comparisons},
                {"max_gradient_distance", worst},
                {"spacing", h}};
    writer.write_json("regularize.json", report);
    checks["monotone"] = sweep.monotone;
    checks["final_error"] = last <= tol(config, "interp_factor") * interp;
    checks["gradient_limits"] = worst <= tol(config, "gradient_factor") * h;
}

void run_singularity(const json& config, Writer& writer, Checks& checks) {
    const catalog::Entry entry = entry_from(config.at("lagrangian"));
    const GridSpec spec = grid_from(config.at("grid"));
    const DiscountedSolution sol = solve_from(config, entry.lagrangian, spec);
    const LasryLionsOptions opts = lasrylions_options(config);
    const double h = spec.min_spacing();
    Vec x0;
    if (config.at("x0").is_null()) {
        const auto singular = singular_set(sol.u, opts.singular_factor * h, opts.regularity);
        if (singular.empty()) throw Error(ErrorKind::kNotSingular, "no singular node detected");
        const Vec center = 0.5 * (spec.lo + spec.hi());
        x0 = spec.node(singular.front());
        for (std::size_t f : singular) {
            if ((spec.node(f) - center).norm() < (x0 - center).norm()) x0 = spec.node(f);
        }
    } else {
        x0 = to_vec(config.at("x0"));
    }
    const auto t_grid = t_grid_from(config.at("t_grid"));
    const SingularTrace trace = trace_singularity(sol, entry.lagrangian, entry.hamiltonian, x0, t_grid, opts);
    auto csv = writer.open("trace.csv");
    trace.write_csv(csv);

    bool all_singular = trace.window.t2 > 0.0;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if (t_grid[k] <= trace.window.t2 && !trace.singular[k]) all_singular = false;
    }
    const Vec rd = trace.right_derivative.limit ? *trace.right_derivative.limit : Vec::Constant(x0.size(), NAN);
    const double to_v0 = (rd - trace.v0).norm();
    const double to_q = (rd - trace.q.q).norm();
    json report = trace.to_json();
    report["right_derivative_to_v0"] = to_v0;
    report["right_derivative_to_q"] = to_q;
    report["spacing"] = h;
    writer.write_json("trace.json", report);
    checks["singular_along_trace"] = all_singular;
    checks["localized"] = trace.localized;
    checks["continuity"] = trace.max_jump <= tol(config, "continuity_factor") * h;
    checks["right_derivative_v0"] = to_v0 <= tol(config, "derivative_factor") * h;
}

// ---------------------------------------------------------------- propcheck

void run_propcheck(const json& config, Writer& writer, Checks& checks) {
    const catalog::Entry entry = entry_from(config.at("lagrangian"));
    const Vec x = to_vec(config.at("x"));
    ProbeOptions po;
    po.samples = config.at("samples").get<int>();
    po.seed = config.at("seed").get<std::uint64_t>();
    po.action = action_options(config);

    const json& vb = config.at("velocity");
    std::vector<std::pair<double, double>> pairs;
    for (const auto& p : vb.at("time_pairs")) pairs.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    const ProbeReport velocity =
        probe_velocity_bounds(entry.lagrangian, x, vb.at("radius").get<double>(), pairs, po);
    const json& cc = config.at("containment");
    const ProbeReport containment = probe_compact_containment(
        entry.lagrangian, x, cc.at("lambda").get<double>(), cc.at("s").get<double>(), cc.at("T").get<double>(), po);
    const json& sc = config.at("semiconcavity");
    const auto horizons = sc.at("horizons").get<std::vector<double>>();
    const ProbeReport semiconcavity = probe_semiconcavity(entry.lagrangian, x, sc.at("s").get<double>(), horizons,
                                                          sc.at("lambda").get<double>(), po);
    const ProbeReport convexity = probe_convexity(entry.lagrangian, x, sc.at("s").get<double>(),
                                                  sc.at("lambda").get<double>(), horizons, po);
    writer.write_json("velocity_bounds.json", velocity.to_json());
    writer.write_json("compact_containment.json", containment.to_json());
    writer.write_json("semiconcavity.json", semiconcavity.to_json());
    writer.write_json("convexity.json", convexity.to_json());
    checks["velocity_bounds"] = velocity.ok();
    checks["compact_containment"] = containment.ok();
    checks["semiconcavity"] = semiconcavity.ok();
    checks["convexity"] = convexity.ok();

    if (plain_free(config.at("lagrangian"))) {
        const double eps = tol(config, "free_constants");
        checks["free_C_lambda"] = std::abs(semiconcavity.constant("C_lambda") - 1.0) <= eps;
        checks["free_C'''_lambda"] = std::abs(convexity.constant("C'''_lambda") - 1.0) <= eps;
        bool kappa = true;
        for (const auto& [r, k] : velocity.tables.at("kappa_T")) kappa = kappa && std::abs(k - r) <= eps;
        checks["free_kappa_T"] = kappa;
    }
}

// ---------------------------------------------------------------- lambda sweep

void run_lambda_sweep(const json& config, Writer& writer, Checks&) {
    const catalog::Entry entry = entry_from(config.at("lagrangian"));
    const GridSpec spec = grid_from(config.at("grid"));
    std::vector<Vec> points;
    for (const auto& p : config.at("x_points")) points.push_back(to_vec(p));
    const double dt = config.at("dt_factor").get<double>() * spec.min_spacing();
    const ProbeReport report =
        lambda_sweep_problem_probe(entry.lagrangian, entry.hamiltonian, config.at("lambdas").get<std::vector<double>>(),
                                   points, spec, dt, tol(config, "fixed_point"), lasrylions_options(config));
    writer.write_json("lambda_sweep.json", report.to_json());
}

// ---------------------------------------------------------------- config

json common_defaults() {
    return {{"seed", 0},
            {"threads", 1},
            {"lagrangian", lagrangian_json("free", {{"dim", 1}})},
            {"tol", {{"action", 1e-8}, {"value", 1e-7}, {"fixed_point", 1e-9}, {"cauchy", 1e-3}}}};
}

json double_well_defaults() {
    json c = common_defaults();
    c["lagrangian"] = lagrangian_json("mechanical", {{"potential", "double_well"}});
    c["grid"] = grid_json({-2.0}, {2.0}, {201}, "constant");
    c["lambda"] = 0.5;
    c["dt_factor"] = 1.0;
    c["max_iterations"] = 500000;
    c["t_grid"] = t_grid_json(0.2, 0.5, 6);
    return c;
}

void check_positive(const json& j, const std::string& what) {
    if (!j.is_number() || !(j.get<double>() > 0.0)) config_error(what + " must be a positive number");
}

}  // namespace

Kind parse_kind(const std::string& name) {
    for (const auto& [kind, n] : kind_names()) {
        if (n == name) return kind;
    }
    config_error("unknown experiment '" + name + "'");
}

std::string to_string(Kind kind) {
    for (const auto& [k, n] : kind_names()) {
        if (k == kind) return n;
    }
    return "unknown";
}

const std::vector<Kind>& all_kinds() {
    static const std::vector<Kind> kinds = [] {
        std::vector<Kind> out;
        for (const auto& [k, n] : kind_names()) out.push_back(k);
        return out;
    }();
    return kinds;
}

json default_config(Kind kind) {
    json c = common_defaults();
    switch (kind) {
        case Kind::kFundamental:
            c["samples"] = 100;
            c["span"] = {0.05, 0.5};
            c["radius"] = 1.0;
            c["lambdas"] = json::array();
            c["gradient_check"] = false;
            c["catalog"] = false;
            c["fd_step"] = 1e-4;
            c["tol"]["oracle"] = 1e-6;
            c["tol"]["gradient"] = 1e-3;
            break;
        case Kind::kOperators:
            c["grid"] = grid_json({-3.0}, {3.0}, {2001}, "constant");
            c["u"] = "neg_abs";
            c["u_scale"] = 1.0;
            c["taus"] = {0.1, 0.2, 0.4};
            c["side"] = "plus";
            c["kappa_probe"] = true;
            c["kappa_points"] = 9;
            c["tol"]["oracle"] = 1e-4;
            c["tol"]["kappa"] = 0.05;
            c["tol"]["scaling"] = 0.1;
            break;
        case Kind::kDiscounted:
            c["lagrangian"] = lagrangian_json("mechanical", {{"potential", "cos"}});
            c["grid"] = grid_json({0.0}, {2.0 * kPi}, {256}, "periodic");
            c["lambda"] = 0.5;
            c["dt_factor"] = 4.0;
            c["max_iterations"] = 500000;
            c["reference_factor"] = 4;
            c["lift_t"] = 0.25;
            c["tol"]["reference"] = 2e-3;
            c["tol"]["lift"] = 5e-3;
            c["tol"]["contraction"] = 0.05;
            c["tol"]["exact"] = 1e-8;
            break;
        case Kind::kRegularize:
            c = double_well_defaults();
            c["probes"] = {{"singular", true}, {"smooth", 8}, {"region", 0.5}};
            c["write_fields"] = true;
            c["tol"]["interp_factor"] = 4.0;
            c["tol"]["gradient_factor"] = 3.0;
            break;
        case Kind::kSingularity:
            c = double_well_defaults();
            c["x0"] = nullptr;
            c["tol"]["continuity_factor"] = 2.0;
            c["tol"]["derivative_factor"] = 2.0;
            break;
        case Kind::kPropcheck:
            c["x"] = {0.0};
            c["samples"] = 60;
            c["velocity"] = {{"radius", 1.0}, {"time_pairs", {{0.0, 0.25}, {0.0, 0.5}, {0.0, 1.0}}}};
            c["containment"] = {{"lambda", 0.5}, {"s", 0.0}, {"T", 0.5}};
            c["semiconcavity"] = {{"s", 0.0}, {"lambda", 1.0}, {"horizons", {0.1, 0.2, 0.4}}};
            c["tol"]["free_constants"] = 1e-6;
            break;
        case Kind::kLambdaSweep:
            c["lagrangian"] = lagrangian_json("mechanical", {{"potential", "cos"}});
            c["grid"] = grid_json({0.0}, {2.0 * kPi}, {128}, "periodic");
            c["lambdas"] = {1.0, 0.5, 0.25};
            c["x_points"] = {{0.0}, {kPi}};
            c["dt_factor"] = 2.0;
            break;
    }
    return c;
}

void merge_config(json& config, const json& overrides) {
    std::function<void(json&, const json&, const std::string&)> merge = [&](json& base, const json& over,
                                                                           const std::string& path) {
        if (!over.is_object()) config_error("configuration root must be an object");
        for (const auto& [key, value] : over.items()) {
            const std::string here = path.empty() ? key : path + "." + key;
            if (here == "lagrangian.params") {
                base[key] = value;
                continue;
            }
            if (!base.contains(key)) config_error("unknown configuration key '" + here + "'");
            json& slot = base[key];
            if (slot.is_object() && value.is_object()) {
                merge(slot, value, here);
            } else if (slot.is_object() != value.is_object()) {
                config_error("configuration key '" + here + "' has the wrong type");
            } else {
                slot = value;
            }
        }
    };
    merge(config, overrides, "");
}

void apply_assignment(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) config_error("expected KEY=VALUE, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json tree = value;
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) tree = json{{*it, tree}};
    merge_config(config, tree);
}

void validate(Kind kind, const json& config) {
    try {
        for (const auto& [key, value] : config.at("tol").items()) check_positive(value, "tol." + key);
        if (config.at("threads").get<int>() < 1) config_error("threads must be at least 1");
        (void)config.at("seed").get<std::uint64_t>();
        (void)entry_from(config.at("lagrangian"));
        if (config.contains("grid")) {
            const GridSpec spec = grid_from(config.at("grid"));
            if (spec.dim() != entry_from(config.at("lagrangian")).lagrangian.dim()) {
                config_error("grid dimension does not match the Lagrangian");
            }
        }
        if (config.contains("lambda")) check_positive(config.at("lambda"), "lambda");
        if (config.contains("dt_factor")) check_positive(config.at("dt_factor"), "dt_factor");
        if (config.contains("t_grid")) {
            const json& t = config.at("t_grid");
            check_positive(t.at("max"), "t_grid.max");
            const double ratio = t.at("ratio").get<double>();
            if (!(ratio > 0.0 && ratio < 1.0)) config_error("t_grid.ratio must lie in (0, 1)");
            if (t.at("count").get<int>() < 1) config_error("t_grid.count must be positive");
        }
        switch (kind) {
            case Kind::kFundamental: {
                const auto span = config.at("span").get<std::vector<double>>();
                if (span.size() != 2 || !(span[0] > 0.0) || !(span[1] >= span[0])) {
                    config_error("span must be [lo, hi] with 0 < lo <= hi");
                }
                if (config.at("samples").get<int>() < 1) config_error("samples must be positive");
                check_positive(config.at("radius"), "radius");
                check_positive(config.at("fd_step"), "fd_step");
                for (double l : config.at("lambdas").get<std::vector<double>>()) {
                    if (!(l > 0.0)) config_error("lambdas must be positive");
                }
                break;
            }
            case Kind::kOperators: {
                const std::string side = config.at("side").get<std::string>();
                if (side != "plus" && side != "minus") config_error("side must be 'plus' or 'minus'");
                const auto taus = config.at("taus").get<std::vector<double>>();
                if (taus.empty()) config_error("taus must not be empty");
                for (double t : taus) {
                    if (!(t > 0.0)) config_error("taus must be positive");
                }
                (void)initial_field(grid_from(config.at("grid")), config.at("u").get<std::string>(), 1.0);
                if (config.at("kappa_points").get<int>() < 1) config_error("kappa_points must be positive");
                break;
            }
            case Kind::kDiscounted:
                if (config.at("reference_factor").get<int>() < 0) config_error("reference_factor must be >= 0");
                if (config.at("lift_t").get<double>() < 0.0) config_error("lift_t must be >= 0");
                break;
            case Kind::kRegularize:
                if (config.at("probes").at("smooth").get<int>() < 0) config_error("probes.smooth must be >= 0");
                check_positive(config.at("probes").at("region"), "probes.region");
                break;
            case Kind::kSingularity:
                if (!config.at("x0").is_null()) (void)to_vec(config.at("x0"));
                break;
            case Kind::kPropcheck:
                if (config.at("samples").get<int>() < 1) config_error("samples must be positive");
                (void)to_vec(config.at("x"));
                break;
            case Kind::kLambdaSweep: {
                const auto l = config.at("lambdas").get<std::vector<double>>();
                for (std::size_t k = 0; k < l.size(); ++k) {
                    if (!(l[k] > 0.0) || (k > 0 && !(l[k] < l[k - 1]))) {
                        config_error("lambdas must be positive and decreasing");
                    }
                }
                break;
            }
        }
    } catch (const json::exception& e) {
        config_error(std::string("malformed configuration: ") + e.what());
    }
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::kConfigError:
        case ErrorKind::kInvalidArgument:
        case ErrorKind::kInvalidHorizon:
        case ErrorKind::kOutOfWindow:
            return 2;
        case ErrorKind::kNonConvergence:
        case ErrorKind::kNoConvergence:
        case ErrorKind::kNonContraction:
            return 3;
        default:
            return 4;
    }
}

void write_manifest(Kind kind, const json& config, const RunResult& result, const std::filesystem::path& out_dir) {
    json manifest;
    manifest["experiment"] = to_string(kind);
    manifest["config"] = config;
    manifest["versions"] = {{"hjreg", HJREG_VERSION},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)},
                            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                            {"compiler", __VERSION__}};
    manifest["status"] = result.exit_code == 0 ? "ok" : "failed";
    manifest["exit_code"] = result.exit_code;
    manifest["error"] = result.error_class.empty()
                            ? json(nullptr)
                            : json{{"class", result.error_class}, {"message", result.message}};
    manifest["checks"] = result.checks;
    manifest["artifacts"] = result.artifacts;
    std::filesystem::create_directories(out_dir);
    std::ofstream(out_dir / "manifest.json") << manifest.dump(2) << '\n';
    std::ofstream(out_dir / "timing.json") << json{{"wall_seconds", result.wall_seconds}}.dump(2) << '\n';
}

RunResult run(Kind kind, const json& config, const std::filesystem::path& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    RunResult result;
    std::filesystem::create_directories(out_dir);
    Writer writer(out_dir);
    try {
        validate(kind, config);
        set_thread_count(config.at("threads").get<int>());
        switch (kind) {
            case Kind::kFundamental: run_fundamental(config, writer, result.checks); break;
            case Kind::kOperators: run_operators(config, writer, result.checks); break;
            case Kind::kDiscounted: run_discounted(config, writer, result.checks); break;
            case Kind::kRegularize: run_regularize(config, writer, result.checks); break;
            case Kind::kSingularity: run_singularity(config, writer, result.checks); break;
            case Kind::kPropcheck: run_propcheck(config, writer, result.checks); break;
            case Kind::kLambdaSweep: run_lambda_sweep(config, writer, result.checks); break;
        }
        for (const auto& [name, ok] : result.checks) {
            if (!ok) result.exit_code = 4;
        }
        if (result.exit_code == 4) result.error_class = "CheckFailed";
    } catch (const Error& e) {
        result.exit_code = exit_code_for(e.kind());
        result.error_class = std::string(to_string(e.kind()));
        result.message = e.what();
    } catch (const json::exception& e) {
        result.exit_code = 2;
        result.error_class = std::string(to_string(ErrorKind::kConfigError));
        result.message = e.what();
    }
    result.artifacts = writer.artifacts();
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    write_manifest(kind, config, result, out_dir);
    return result;
}

}  // namespace hjreg::experiments
