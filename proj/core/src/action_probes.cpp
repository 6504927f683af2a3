#include "hjreg/action_probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "hjreg/error.hpp"
#include "hjreg/parallel.hpp"

namespace hjreg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Point with norm uniform-in-volume between r_lo and r_hi.
Vec sample_shell(std::mt19937_64& rng, int n, double r_lo, double r_hi) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    Vec dir(n);
    do {
        for (int i = 0; i < n; ++i) dir(i) = normal(rng);
    } while (dir.norm() < 1e-12);
    dir /= dir.norm();
    const double lo = std::pow(r_lo, n);
    const double hi = std::pow(r_hi, n);
    return std::pow(lo + unit(rng) * (hi - lo), 1.0 / n) * dir;
}

Vec unit_vector(int n, int axis, double sign) {
    Vec e = Vec::Zero(n);
    e(axis) = sign;
    return e;
}

struct CurveSups {
    double speed = 0.0;
    double momentum = 0.0;
    double excursion = 0.0;
};

/// Sups along the Hermite minimizer at the nodes and segment midpoints.
CurveSups curve_sups(const TonelliLagrangian& lagrangian, const FundamentalSolution& fs) {
    CurveSups out;
    const Curve& c = fs.minimizer;
    auto visit = [&](double tau, const Vec& pos, const Vec& vel) {
        out.speed = std::max(out.speed, vel.norm());
        out.momentum = std::max(out.momentum, lagrangian.grad_v(tau, pos, vel).norm());
        out.excursion = std::max(out.excursion, (pos - fs.x).norm());
    };
    for (std::size_t k = 0; k < c.times.size(); ++k) {
        visit(c.times[k], c.nodes[k], c.velocities[k]);
        if (k + 1 < c.times.size()) {
            const double mid = 0.5 * (c.times[k] + c.times[k + 1]);
            visit(mid, c.position(mid), c.velocity(mid));
        }
    }
    return out;
}

std::string describe(const char* what, double a, double b) {
    std::ostringstream os;
    os.precision(6);
    os << what << " (" << a << ", " << b << ")";
    return os.str();
}

}  // namespace

ProbeReport probe_velocity_bounds(const TonelliLagrangian& lagrangian, const Vec& x, double radius,
                                  const std::vector<std::pair<double, double>>& time_pairs,
                                  const ProbeOptions& options) {
    if (time_pairs.empty() || radius < 0.0) {
        throw Error(ErrorKind::kInvalidArgument, "velocity probe needs time pairs and radius >= 0");
    }
    const int n = lagrangian.dim();
    const int per_pair = std::max(2, options.samples / static_cast<int>(time_pairs.size()));
    struct Job {
        std::size_t pair;
        Vec y;
    };
    std::vector<Job> jobs;
    std::mt19937_64 rng(options.seed);
    for (std::size_t p = 0; p < time_pairs.size(); ++p) {
        for (int i = 0; i < per_pair; ++i) {
            Vec offset;
            if (i == 0) {
                offset = radius * unit_vector(n, 0, 1.0);
            } else if (i % 2 == 1) {
                offset = sample_shell(rng, n, radius, radius);
            } else {
                offset = sample_shell(rng, n, 0.0, radius);
            }
            jobs.push_back({p, x + offset});
        }
    }
    std::vector<CurveSups> sups(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        const auto [s, t] = time_pairs[jobs[i].pair];
        sups[i] = curve_sups(lagrangian, minimize_action(lagrangian, s, t, x, jobs[i].y, options.action));
    });

    ProbeReport report("velocity_bounds");
    report.samples = jobs.size();
    std::map<double, CurveSups> by_ratio;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto [s, t] = time_pairs[jobs[i].pair];
        const double mean_speed = (jobs[i].y - x).norm() / (t - s);
        report.record(sups[i].speed - mean_speed + 1e-9 * (1.0 + mean_speed), "sup speed below mean speed");
        CurveSups& slot = by_ratio[radius / (t - s)];
        slot.speed = std::max(slot.speed, sups[i].speed);
        slot.momentum = std::max(slot.momentum, sups[i].momentum);
        slot.excursion = std::max(slot.excursion, sups[i].excursion);
    }
    auto& speed_table = report.tables["kappa_T"];
    auto& momentum_table = report.tables["momentum"];
    auto& excursion_table = report.tables["excursion"];
    const CurveSups* prev = nullptr;
    double prev_r = 0.0;
    for (const auto& [r, v] : by_ratio) {
        speed_table.push_back({r, v.speed});
        momentum_table.push_back({r, v.momentum});
        excursion_table.push_back({r, v.excursion});
        if (prev) {
            report.record(v.speed - prev->speed + 1e-9 * (1.0 + prev->speed),
                          describe("kappa_T decreases between r =", prev_r, r));
        }
        prev = &v;
        prev_r = r;
    }
    double max_speed = 0.0;
    for (const auto& [r, v] : by_ratio) max_speed = std::max(max_speed, v.speed);
    report.constants["radius"] = radius;
    report.constants["max_speed"] = max_speed;
    return report;
}

ProbeReport probe_compact_containment(const TonelliLagrangian& lagrangian, const Vec& x, double lambda_cone,
                                      double s, double horizon, const ProbeOptions& options) {
    if (!(horizon > 0.0 && horizon < 1.0) || !(lambda_cone > 0.0)) {
        throw Error(ErrorKind::kInvalidArgument, "containment probe needs 0 < T < 1 and lambda > 0");
    }
    const int n = lagrangian.dim();
    constexpr double kMargin = 1.1;

    // kappa(4 lambda): worst sups on the sphere |y - x| = 4 lambda (t - s), t - s <= 1.
    constexpr int kGaps = 20;
    std::vector<std::pair<double, Vec>> calibration;
    for (int i = 0; i < kGaps; ++i) {
        const double gap = 0.05 + (1.0 - 0.05) * i / (kGaps - 1);
        for (int axis = 0; axis < n; ++axis) {
            for (double sign : {1.0, -1.0}) {
                calibration.emplace_back(gap, x + 4.0 * lambda_cone * gap * unit_vector(n, axis, sign));
            }
        }
    }
    std::vector<CurveSups> calib_sups(calibration.size());
    parallel_for(calibration.size(), [&](std::size_t i) {
        calib_sups[i] = curve_sups(lagrangian, minimize_action(lagrangian, s, s + calibration[i].first, x,
                                                               calibration[i].second, options.action));
    });
    double kappa = 0.0;
    for (const auto& c : calib_sups) kappa = std::max({kappa, c.speed, c.momentum, c.excursion});
    kappa *= kMargin;

    struct Job {
        double h;
        Vec y;
        Vec z;
    };
    std::vector<Job> jobs;
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit;
    const double lam_t = lambda_cone * horizon;
    for (int i = 0; i < options.samples; ++i) {
        Job job;
        if (i == 0) {
            job = {0.0, x, Vec::Zero(n)};
        } else {
            const double h_lo = -0.5 * horizon;
            const double h_hi = 1.0 - horizon;
            job.h = h_lo + (h_hi - h_lo) * (0.001 + 0.998 * unit(rng));
            job.y = x + sample_shell(rng, n, 0.0, 0.999 * lam_t);
            job.z = sample_shell(rng, n, 0.0, 0.999 * lam_t);
        }
        jobs.push_back(std::move(job));
    }
    std::vector<CurveSups> sups(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        const double end = s + horizon + jobs[i].h;
        sups[i] = curve_sups(lagrangian,
                             minimize_action(lagrangian, s, end, x, jobs[i].y + jobs[i].z, options.action));
    });

    ProbeReport report("compact_containment");
    report.samples = jobs.size();
    CurveSups worst;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        report.record(kappa - sups[i].speed, "speed outside B(0, kappa(4 lambda))");
        report.record(kappa - sups[i].momentum, "momentum outside B(0, kappa(4 lambda))");
        report.record(kappa - sups[i].excursion, "position outside B(x, kappa(4 lambda))");
        report.record(s + 1.0 - (s + horizon + jobs[i].h), "time outside [s, s + 1]");
        worst.speed = std::max(worst.speed, sups[i].speed);
        worst.momentum = std::max(worst.momentum, sups[i].momentum);
        worst.excursion = std::max(worst.excursion, sups[i].excursion);
    }
    report.constants["kappa_4lambda"] = kappa;
    report.constants["kappa_margin"] = kMargin;
    report.constants["max_speed"] = worst.speed;
    report.constants["max_momentum"] = worst.momentum;
    report.constants["max_excursion"] = worst.excursion;
    report.constants["lambda"] = lambda_cone;
    report.constants["T"] = horizon;
    return report;
}

namespace {

struct DefectJob {
    double horizon;
    double h;
    Vec y;
    Vec z;
    bool spatial;
};

struct DefectResult {
    double ratio = kNaN;  // T * defect / (h^2 + |z|^2)
    bool converged = false;
};

std::vector<DefectJob> defect_jobs(int n, const Vec& x, const std::vector<double>& horizons, double lambda_cone,
                                   int samples, double h_lo_frac, double h_hi_frac, std::uint64_t seed) {
    std::vector<DefectJob> jobs;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit;
    const int per_t = std::max(2, samples / static_cast<int>(horizons.size()));
    for (double horizon : horizons) {
        const double lam_t = lambda_cone * horizon;
        for (int i = 0; i < per_t; ++i) {
            DefectJob job;
            job.horizon = horizon;
            job.spatial = i % 2 == 0;
            job.y = x + sample_shell(rng, n, 0.0, 0.95 * lam_t);
            job.z = sample_shell(rng, n, 0.1 * lam_t, 0.95 * lam_t);
            job.h = job.spatial ? 0.0 : horizon * (h_lo_frac + (h_hi_frac - h_lo_frac) * unit(rng));
            jobs.push_back(std::move(job));
        }
    }
    return jobs;
}

std::vector<DefectResult> run_defects(const TonelliLagrangian& lagrangian, const Vec& x, double s,
                                      const std::vector<DefectJob>& jobs, const ActionOptions& action) {
    std::vector<DefectResult> out(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        const DefectJob& job = jobs[i];
        const double t = s + job.horizon;
        try {
            const double a_plus = minimize_action(lagrangian, s, t + job.h, x, job.y + job.z, action).value;
            const double a_minus = minimize_action(lagrangian, s, t - job.h, x, job.y - job.z, action).value;
            const double a_mid = minimize_action(lagrangian, s, t, x, job.y, action).value;
            const double defect = a_plus + a_minus - 2.0 * a_mid;
            out[i] = {job.horizon * defect / (job.h * job.h + job.z.squaredNorm()), true};
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::kNoConvergence) throw;
        }
    });
    return out;
}

}  // namespace

ProbeReport probe_semiconcavity(const TonelliLagrangian& lagrangian, const Vec& x, double s,
                                const std::vector<double>& horizons, double lambda_cone,
                                const ProbeOptions& options) {
    if (horizons.empty()) throw Error(ErrorKind::kInvalidArgument, "semiconcavity probe needs horizons");
    for (double horizon : horizons) {
        if (!(horizon > 0.0 && horizon < 2.0 / 3.0)) {
            throw Error(ErrorKind::kInvalidArgument, "semiconcavity probe needs 0 < T < 2/3");
        }
    }
    const auto jobs = defect_jobs(lagrangian.dim(), x, horizons, lambda_cone, options.samples, -0.45, 0.45,
                                  options.seed);
    const auto results = run_defects(lagrangian, x, s, jobs, options.action);

    ProbeReport report("semiconcavity");
    report.samples = jobs.size();
    std::map<double, double> spatial, joint;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!results[i].converged) {
            report.record(-1.0, "solver failed inside the semiconcavity cone");
            continue;
        }
        auto& slot = jobs[i].spatial ? spatial : joint;
        auto [it, inserted] = slot.try_emplace(jobs[i].horizon, results[i].ratio);
        if (!inserted) it->second = std::max(it->second, results[i].ratio);
    }
    auto summarize = [&](const std::map<double, double>& by_t, const std::string& key) {
        if (by_t.empty()) return;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        auto& table = report.tables[key + "_by_T"];
        for (const auto& [horizon, c] : by_t) {
            table.push_back({horizon, c});
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        report.constants[key] = hi;
        report.record(10.0 * std::max(lo, 1.0) - hi, key + " not uniform across T");
    };
    summarize(spatial, "C_lambda");
    summarize(joint, "C_lambda_joint");
    report.constants["lambda"] = lambda_cone;
    return report;
}

ProbeReport probe_convexity(const TonelliLagrangian& lagrangian, const Vec& x, double s, double lambda_cone,
                            const std::vector<double>& horizons, const ProbeOptions& options) {
    if (horizons.empty()) throw Error(ErrorKind::kInvalidArgument, "convexity probe needs horizons");
    auto jobs = defect_jobs(lagrangian.dim(), x, horizons, lambda_cone, options.samples, 0.0, 0.499,
                            options.seed);
    const auto results = run_defects(lagrangian, x, s, jobs, options.action);

    struct PerT {
        double semiconvex = -std::numeric_limits<double>::infinity();
        double convex = std::numeric_limits<double>::infinity();
        bool all_converged = true;
    };
    std::map<double, PerT> by_t;
    for (double horizon : horizons) by_t[horizon];
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        PerT& slot = by_t[jobs[i].horizon];
        if (!results[i].converged) {
            slot.all_converged = false;
            continue;
        }
        if (jobs[i].spatial) {
            slot.convex = std::min(slot.convex, results[i].ratio);
        } else {
            slot.semiconvex = std::max(slot.semiconvex, -results[i].ratio);
        }
    }

    ProbeReport report("convexity");
    report.samples = jobs.size();
    double t_prime = 0.0;
    double t_second = 0.0;
    double c_semiconvex = 0.0;
    double c_convex = std::numeric_limits<double>::infinity();
    bool convex_prefix = true;
    auto& table = report.tables["C'''_by_T"];
    for (const auto& [horizon, v] : by_t) {
        table.push_back({horizon, v.convex});
        if (!v.all_converged) break;
        t_prime = horizon;
        c_semiconvex = std::max(c_semiconvex, v.semiconvex);
        if (convex_prefix && v.convex > 0.0) {
            t_second = horizon;
            c_convex = std::min(c_convex, v.convex);
        } else {
            convex_prefix = false;
        }
    }
    report.record(t_prime > 0.0 ? 1.0 : -1.0, "no horizon with a converged semiconvexity cone");
    report.record(t_second > 0.0 ? c_convex : -1.0, "no horizon with positive in-space convexity");
    report.constants["C''_lambda"] = c_semiconvex;
    report.constants["C'''_lambda"] = t_second > 0.0 ? c_convex : 0.0;
    report.constants["T'_lambda"] = t_prime;
    report.constants["T''_lambda"] = t_second;
    report.constants["lambda"] = lambda_cone;
    return report;
}

}  // namespace hjreg
