#include "hjreg/laxoleinik.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "hjreg/error.hpp"
#include "hjreg/numerics.hpp"
#include "hjreg/parallel.hpp"

namespace hjreg {

namespace {

enum class Side { kPlus, kMinus };

using Index = std::array<int, kMaxDim>;

struct Eval {
    Vec y;
    double objective = -std::numeric_limits<double>::infinity();
    /// d/dy of the kernel term A as it enters the objective.
    Vec grad_a;
    /// Derivative of the operator value with respect to the base point.
    Vec grad_base;
    Vec velocity_start;
};

class PointSearch {
public:
    PointSearch(const GridFunction& u, const ActionKernel& kernel, double s, double t, const Vec& x, Side side,
                const LaxOptions& options, double radius)
        : u_(u), kernel_(kernel), s_(s), t_(t), x_(x), side_(side), options_(options), radius_(radius),
          spec_(u.spec()), n_(u.dim()) {}

    Eval evaluate(const Vec& y) const {
        Eval e;
        e.y = y;
        if (side_ == Side::kPlus) {
            const KernelValue kv = kernel_.evaluate(s_, t_, x_, y);
            e.objective = u_(y) - kv.value;
            e.grad_a = kv.grad_y;
            e.grad_base = -kv.grad_x;
            e.velocity_start = kv.velocity_start;
        } else {
            const KernelValue kv = kernel_.evaluate(s_, t_, y, x_);
            e.objective = -u_(y) - kv.value;
            e.grad_a = kv.grad_x;
            e.grad_base = kv.grad_y;
            e.velocity_start = kv.velocity_start;
        }
        return e;
    }

    [[nodiscard]] double u_sign() const { return side_ == Side::kPlus ? 1.0 : -1.0; }

    Vec lattice_point(const Index& k) const {
        Vec y(n_);
        for (int i = 0; i < n_; ++i) y(i) = spec_.lo(i) + k[i] * spec_.spacing(i);
        return y;
    }

    bool in_ball(const Vec& y) const { return (y - x_).norm() <= radius_ * (1.0 + 1e-12); }

    const Eval& cached(const Index& k) {
        auto it = cache_.find(k);
        if (it != cache_.end()) return it->second;
        return cache_.emplace(k, evaluate(lattice_point(k))).first->second;
    }

    std::vector<Eval> run() {
        Index k_lo{0, 0, 0}, k_hi{0, 0, 0}, k_near{0, 0, 0};
        int stride = 1;
        for (int i = 0; i < n_; ++i) {
            const double h = spec_.spacing(i);
            k_lo[i] = static_cast<int>(std::ceil((x_(i) - radius_ - spec_.lo(i)) / h - 1e-9));
            k_hi[i] = static_cast<int>(std::floor((x_(i) + radius_ - spec_.lo(i)) / h + 1e-9));
            k_near[i] = static_cast<int>(std::lround((x_(i) - spec_.lo(i)) / h));
            stride = std::max(stride, (k_hi[i] - k_lo[i] + 1) / options_.coarse_points);
        }

        // Coarse scan anchored at the lattice node nearest x.
        std::vector<std::pair<double, Index>> coarse;
        for_each_index(k_lo, k_hi, k_near, stride, [&](const Index& k) {
            const Vec y = lattice_point(k);
            if (!in_ball(y)) return;
            coarse.emplace_back(cached(k).objective, k);
        });
        std::sort(coarse.begin(), coarse.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        std::vector<Index> seeds;
        for (const auto& [value, k] : coarse) {
            bool separated = true;
            for (const Index& s : seeds) {
                int dist = 0;
                for (int i = 0; i < n_; ++i) dist = std::max(dist, std::abs(k[i] - s[i]));
                if (dist <= stride) separated = false;
            }
            if (separated) seeds.push_back(k);
            if (static_cast<int>(seeds.size()) >= options_.seeds) break;
        }

        std::vector<Eval> candidates;
        candidates.push_back(evaluate(x_));
        for (const Index& seed : seeds) {
            Index lo{0, 0, 0}, hi{0, 0, 0};
            for (int i = 0; i < n_; ++i) {
                lo[i] = std::max(k_lo[i], seed[i] - stride);
                hi[i] = std::min(k_hi[i], seed[i] + stride);
            }
            Index best = seed;
            double best_value = cached(seed).objective;
            for_each_index(lo, hi, seed, 1, [&](const Index& k) {
                if (!in_ball(lattice_point(k))) return;
                const double v = cached(k).objective;
                if (v > best_value) {
                    best_value = v;
                    best = k;
                }
            });
            candidates.push_back(n_ == 1 ? polish_1d(best) : polish_nd(best));
        }
        return candidates;
    }

private:
    template <typename Fn>
    void for_each_index(const Index& lo, const Index& hi, const Index& anchor, int stride, Fn&& fn) const {
        Index first{0, 0, 0};
        for (int i = 0; i < n_; ++i) {
            const int offset = ((anchor[i] - lo[i]) % stride + stride) % stride;
            first[i] = lo[i] + offset;
        }
        Index k = first;
        while (true) {
            fn(k);
            int axis = n_ - 1;
            while (axis >= 0) {
                k[axis] += stride;
                if (k[axis] <= hi[axis]) break;
                k[axis] = first[axis];
                --axis;
            }
            if (axis < 0) break;
        }
    }

    Eval polish_1d(const Index& best) {
        Eval top = cached(best);
        const double h = spec_.spacing(0);
        for (int side : {-1, 1}) {
            Index a = best, b = best;
            if (side < 0) {
                a[0] -= 1;
            } else {
                b[0] += 1;
            }
            const Vec ya = lattice_point(a);
            const Vec yb = lattice_point(b);
            const Eval& ea = cached(a);
            const Eval& eb = cached(b);
            const double slope = u_sign() * (u_(yb) - u_(ya)) / h;
            const double ga = slope - ea.grad_a(0);
            const double gb = slope - eb.grad_a(0);
            if (!(ga > 0.0 && gb < 0.0)) continue;
            const double root = numerics::bracketed_root(
                [&](double y) { return slope - evaluate(vec1(y)).grad_a(0); }, ya(0), yb(0), ga, gb,
                1e-13 * (1.0 + std::abs(ya(0))) + 1e-9 * h);
            const Eval e = evaluate(vec1(root));
            if (e.objective > top.objective && in_ball(e.y)) top = e;
        }
        return top;
    }

    Eval polish_nd(const Index& best) {
        const Eval start = cached(best);
        const Vec lo = start.y - spec_.spacing;
        const Vec hi = start.y + spec_.spacing;
        numerics::NelderMeadOptions nm;
        nm.initial_step = 0.5 * spec_.min_spacing();
        nm.x_tol = 1e-10 * (1.0 + start.y.norm());
        nm.f_tol = 1e-15;
        nm.max_evaluations = 200;
        const auto result = numerics::nelder_mead_minimize(
            [&](const Vec& y) { return in_ball(y) ? -evaluate(y).objective : std::numeric_limits<double>::infinity(); },
            start.y, lo, hi, nm);
        if (-result.value > start.objective) return evaluate(result.x);
        return start;
    }

    const GridFunction& u_;
    const ActionKernel& kernel_;
    double s_;
    double t_;
    Vec x_;
    Side side_;
    const LaxOptions& options_;
    double radius_;
    const GridSpec& spec_;
    int n_;
    std::map<Index, Eval> cache_;
};

LaxPoint search_point(const GridFunction& u, const ActionKernel& kernel, double s, double t, const Vec& x,
                      Side side, const LaxOptions& options, double lip) {
    if (!(s < t)) throw Error(ErrorKind::kInvalidArgument, "Lax-Oleinik operators need s < t");
    const double gap = t - s;
    const double kappa = options.kappa0 ? *options.kappa0 : kappa0_bootstrap(kernel.lagrangian(), lip, s, t, x);
    const double radius = kappa * gap;
    const GridSpec& spec = u.spec();
    if (spec.boundary == BoundaryPolicy::kConstantExtend && !spec.contains(x, radius)) {
        throw Error(ErrorKind::kSearchBallClipped, "search ball B(x, kappa0 (t - s)) leaves the grid box");
    }
    PointSearch search(u, kernel, s, t, x, side, options, radius);
    std::vector<Eval> candidates = search.run();
    std::sort(candidates.begin(), candidates.end(), [](const Eval& a, const Eval& b) {
        if (a.objective != b.objective) return a.objective > b.objective;
        for (int i = 0; i < a.y.size(); ++i) {
            if (a.y(i) != b.y(i)) return a.y(i) < b.y(i);
        }
        return false;
    });

    const double h = spec.min_spacing();
    LaxPoint out;
    out.kappa0 = kappa;
    out.record.x = x;
    out.record.gap = gap;
    out.record.maximize = side == Side::kPlus;
    const Eval& best = candidates.front();
    for (const Eval& c : candidates) {
        if (c.objective < best.objective - options.value_tol) break;
        bool duplicate = false;
        for (const Vec& m : out.record.maximizers) {
            if ((m - c.y).norm() <= 0.25 * h) duplicate = true;
        }
        if (duplicate) continue;
        out.record.maximizers.push_back(c.y);
        out.record.values.push_back(side == Side::kPlus ? c.objective : -c.objective);
    }
    out.record.unique = check_condition_M(out.record, options.value_tol, options.spatial_tol_factor * h);
    out.value = side == Side::kPlus ? best.objective : -best.objective;
    out.velocity_start = best.velocity_start;
    if (out.record.unique) out.gradient = best.grad_base;
    for (const Vec& m : out.record.maximizers) {
        if ((m - x).norm() >= radius - h && radius > h) out.boundary_hit = true;
    }
    return out;
}

GridSpec default_output(const GridFunction& u, const ActionKernel& kernel, double s, double t,
                        const LaxOptions& options, double lip) {
    const GridSpec& spec = u.spec();
    if (spec.boundary == BoundaryPolicy::kPeriodic) return spec;
    double radius = 0.0;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double kappa =
            options.kappa0 ? *options.kappa0 : kappa0_bootstrap(kernel.lagrangian(), lip, s, t, spec.node(i));
        radius = std::max(radius, kappa * (t - s));
    }
    const Vec margin = Vec::Constant(spec.dim(), radius);
    try {
        return spec.sub_box(spec.lo + margin, spec.hi() - margin);
    } catch (const Error&) {
        throw Error(ErrorKind::kSearchBallClipped, "grid box too small for the localization radius");
    }
}

LaxResult apply_operator(const GridFunction& u, const ActionKernel& kernel, double s, double t, Side side,
                         const LaxOptions& options) {
    if (!(s < t)) throw Error(ErrorKind::kInvalidArgument, "Lax-Oleinik operators need s < t");
    const double lip = u.lipschitz();
    const GridSpec out_spec = options.output ? *options.output : default_output(u, kernel, s, t, options, lip);
    std::vector<LaxPoint> points(out_spec.size());
    parallel_for(points.size(), [&](std::size_t i) {
        points[i] = search_point(u, kernel, s, t, out_spec.node(i), side, options, lip);
    });
    LaxResult result;
    std::vector<double> values(points.size());
    result.records.reserve(points.size());
    result.gradients.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        values[i] = points[i].value;
        result.kappa0_bound = std::max(result.kappa0_bound, points[i].kappa0);
        for (const Vec& m : points[i].record.maximizers) {
            result.kappa0_empirical = std::max(result.kappa0_empirical, (m - points[i].record.x).norm() / (t - s));
        }
        if (points[i].boundary_hit) ++result.boundary_hits;
        result.records.push_back(std::move(points[i].record));
        result.gradients.push_back(std::move(points[i].gradient));
    }
    result.value = GridFunction(out_spec, std::move(values));
    return result;
}

}  // namespace

double kappa0_bootstrap(const TonelliLagrangian& lagrangian, double lip, double t0, double t, const Vec& x) {
    const Vec zero = Vec::Zero(lagrangian.dim());
    double l0 = -std::numeric_limits<double>::infinity();
    for (double tau : {t0, 0.5 * (t0 + t), t}) l0 = std::max(l0, lagrangian.eval(tau, x, zero));
    const Growth& g = lagrangian.growth();
    auto excess = [&](double r) { return g.theta(r) - g.c0 - l0 - lip * r; };
    if (excess(0.0) > 0.0) return 0.0;
    double lo = 0.0;
    double hi = 1.0;
    while (excess(hi) <= 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) throw Error(ErrorKind::kInvalidArgument, "growth bound theta is not superlinear");
    }
    return numerics::bracketed_root(excess, lo, hi, excess(lo), excess(hi), 1e-12 * hi);
}

double barrier(const GridFunction& u, const ActionKernel& kernel, double t0, double t, const Vec& x,
               const Vec& y) {
    return u(y) - kernel.evaluate(t0, t, x, y).value;
}

double barrier(const GridFunction& u, const TonelliLagrangian& lagrangian, double t0, double t, const Vec& x,
               const Vec& y, const ActionOptions& options) {
    return u(y) - minimize_action(lagrangian, t0, t, x, y, options).value;
}

LaxPoint lax_plus_at(const GridFunction& u, const ActionKernel& kernel, double s, double t, const Vec& x,
                     const LaxOptions& options) {
    return search_point(u, kernel, s, t, x, Side::kPlus, options, u.lipschitz());
}

LaxPoint lax_minus_at(const GridFunction& u, const ActionKernel& kernel, double s, double t, const Vec& x,
                      const LaxOptions& options) {
    return search_point(u, kernel, s, t, x, Side::kMinus, options, u.lipschitz());
}

LaxResult lax_plus(const GridFunction& u, const ActionKernel& kernel, double s, double t,
                   const LaxOptions& options) {
    return apply_operator(u, kernel, s, t, Side::kPlus, options);
}

LaxResult lax_plus(const GridFunction& u, const TonelliLagrangian& lagrangian, double s, double t,
                   const LaxOptions& options) {
    return lax_plus(u, *make_kernel(lagrangian, options.kernel, options.action), s, t, options);
}

LaxResult lax_minus(const GridFunction& u, const ActionKernel& kernel, double s, double t,
                    const LaxOptions& options) {
    return apply_operator(u, kernel, s, t, Side::kMinus, options);
}

LaxResult lax_minus(const GridFunction& u, const TonelliLagrangian& lagrangian, double s, double t,
                    const LaxOptions& options) {
    return lax_minus(u, *make_kernel(lagrangian, options.kernel, options.action), s, t, options);
}

GridFunction solve_cauchy(const GridFunction& u0, const TonelliLagrangian& lagrangian, double t0, double t,
                          int n_steps, const LaxOptions& options) {
    if (n_steps < 1) throw Error(ErrorKind::kInvalidArgument, "n_steps must be at least 1");
    if (!(t0 < t)) throw Error(ErrorKind::kInvalidArgument, "solve_cauchy needs t0 < t");
    const auto kernel = make_kernel(lagrangian, options.kernel, options.action);
    GridFunction u = u0;
    for (int k = 0; k < n_steps; ++k) {
        const double a = t0 + (t - t0) * k / n_steps;
        const double b = k + 1 == n_steps ? t : t0 + (t - t0) * (k + 1) / n_steps;
        LaxOptions step = options;
        if (k + 1 < n_steps) step.output.reset();
        u = lax_minus(u, *kernel, a, b, step).value;
    }
    return u;
}

ProbeReport estimate_kappa0(const GridFunction& u, const ActionKernel& kernel, double t0,
                            const std::vector<double>& t_grid, const std::vector<Vec>& sample_points,
                            const LaxOptions& options) {
    if (t_grid.empty() || sample_points.empty()) {
        throw Error(ErrorKind::kInvalidArgument, "estimate_kappa0 needs times and sample points");
    }
    ProbeReport report("kappa0");
    double kappa_by_scale[2] = {0.0, 0.0};
    double lip_by_scale[2] = {0.0, 0.0};
    double bound = 0.0;
    const double scales[2] = {1.0, 2.0};
    for (int si = 0; si < 2; ++si) {
        std::vector<double> values = u.values();
        for (double& v : values) v *= scales[si];
        const GridFunction scaled(u.spec(), std::move(values));
        const double lip = scaled.lipschitz();
        lip_by_scale[si] = lip;
        auto& table = report.tables[si == 0 ? "kappa0_by_t" : "kappa0_by_t_scaled"];
        double running = 0.0;
        for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
            const double t = t_grid[ti];
            std::vector<LaxPoint> points(sample_points.size());
            parallel_for(points.size(), [&](std::size_t i) {
                points[i] = search_point(scaled, kernel, t0, t, sample_points[i], Side::kPlus, options, lip);
            });
            double kappa_t = 0.0;
            for (const LaxPoint& p : points) {
                bound = std::max(bound, p.kappa0);
                for (const Vec& m : p.record.maximizers) {
                    const double dist = (m - p.record.x).norm();
                    kappa_t = std::max(kappa_t, dist / (t - t0));
                    report.record(p.kappa0 * (t - t0) - dist, "maximizer outside the localization ball");
                    ++report.samples;
                }
            }
            table.push_back({t, kappa_t});
            if (ti > 0) report.record(1.05 * running + 1e-6 - kappa_t, "kappa0 grows as t -> t0");
            running = std::max(running, kappa_t);
        }
        kappa_by_scale[si] = running;
    }
    report.constants["kappa0"] = kappa_by_scale[0];
    report.constants["kappa0_bound"] = bound;
    report.constants["lip"] = lip_by_scale[0];
    report.constants["kappa0_scaled"] = kappa_by_scale[1];
    report.constants["lip_scaled"] = lip_by_scale[1];
    report.constants["kappa0_ratio"] = kappa_by_scale[0] > 0.0 ? kappa_by_scale[1] / kappa_by_scale[0] : 0.0;
    report.constants["lip_ratio"] = lip_by_scale[0] > 0.0 ? lip_by_scale[1] / lip_by_scale[0] : 0.0;
    return report;
}

bool check_condition_M(const MaximizerRecord& record, double value_tol, double spatial_tol) {
    if (record.maximizers.empty()) return false;
    const double best = record.maximize ? *std::max_element(record.values.begin(), record.values.end())
                                        : *std::min_element(record.values.begin(), record.values.end());
    std::vector<const Vec*> near;
    for (std::size_t i = 0; i < record.maximizers.size(); ++i) {
        if (std::abs(record.values[i] - best) <= value_tol) near.push_back(&record.maximizers[i]);
    }
    for (std::size_t i = 0; i < near.size(); ++i) {
        for (std::size_t j = i + 1; j < near.size(); ++j) {
            if ((*near[i] - *near[j]).norm() > spatial_tol) return false;
        }
    }
    return true;
}

}  // namespace hjreg
