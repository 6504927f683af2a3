#include "hjreg/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/QR>

#include "hjreg/error.hpp"
#include "hjreg/numerics.hpp"
#include "hjreg/parallel.hpp"

namespace hjreg {

namespace {

using Index = std::array<int, kMaxDim>;

std::optional<std::size_t> shifted(const GridSpec& spec, std::size_t flat, int axis, int step) {
    auto idx = spec.multi_index(flat);
    int k = idx[axis] + step;
    if (spec.boundary == BoundaryPolicy::kPeriodic) {
        k = ((k % spec.counts[axis]) + spec.counts[axis]) % spec.counts[axis];
    } else if (k < 0 || k >= spec.counts[axis]) {
        return std::nullopt;
    }
    idx[axis] = k;
    return spec.flat_index(idx);
}

/// Second difference along an axis; NaN at a constant-extend edge.
double second_difference(const GridFunction& u, std::size_t flat, int axis) {
    const auto a = shifted(u.spec(), flat, axis, -1);
    const auto b = shifted(u.spec(), flat, axis, 1);
    if (!a || !b) return std::numeric_limits<double>::quiet_NaN();
    const double h = u.spec().spacing(axis);
    return (u[*a] + u[*b] - 2.0 * u[flat]) / (h * h);
}

bool near_edge(const GridSpec& spec, std::size_t flat, int margin) {
    if (spec.boundary == BoundaryPolicy::kPeriodic) return false;
    const auto idx = spec.multi_index(flat);
    for (int i = 0; i < spec.dim(); ++i) {
        if (idx[i] < margin || idx[i] >= spec.counts[i] - margin) return true;
    }
    return false;
}

/// Nodes within `radius` of x as (flat index, displacement from x).
std::vector<std::pair<std::size_t, Vec>> nodes_near(const GridSpec& spec, const Vec& x, double radius) {
    const int n = spec.dim();
    Index lo{0, 0, 0}, hi{0, 0, 0};
    for (int i = 0; i < n; ++i) {
        lo[i] = static_cast<int>(std::ceil((x(i) - radius - spec.lo(i)) / spec.spacing(i) - 1e-9));
        hi[i] = static_cast<int>(std::floor((x(i) + radius - spec.lo(i)) / spec.spacing(i) + 1e-9));
        if (spec.boundary == BoundaryPolicy::kConstantExtend) {
            lo[i] = std::max(lo[i], 0);
            hi[i] = std::min(hi[i], spec.counts[i] - 1);
        }
    }
    std::vector<std::pair<std::size_t, Vec>> out;
    for (int i = 0; i < n; ++i) {
        if (hi[i] < lo[i]) return out;
    }
    Index k = lo;
    while (true) {
        Vec d(n);
        Index wrapped{0, 0, 0};
        for (int i = 0; i < n; ++i) {
            d(i) = spec.lo(i) + k[i] * spec.spacing(i) - x(i);
            wrapped[i] = ((k[i] % spec.counts[i]) + spec.counts[i]) % spec.counts[i];
        }
        if (d.norm() <= radius * (1.0 + 1e-12)) out.emplace_back(spec.flat_index(wrapped), d);
        int axis = n - 1;
        while (axis >= 0) {
            if (++k[axis] <= hi[axis]) break;
            k[axis] = lo[axis];
            --axis;
        }
        if (axis < 0) break;
    }
    return out;
}

/// Minimizes |V w - p|^2 over the simplex; returns the distance.
double distance_to_hull(const std::vector<Vec>& points, const Vec& p) {
    const int m = static_cast<int>(points.size());
    if (m == 0) return std::numeric_limits<double>::infinity();
    Eigen::MatrixXd v(p.size(), m);
    for (int j = 0; j < m; ++j) v.col(j) = points[j];
    const double lipschitz = std::max(1e-300, (v.transpose() * v).norm());
    Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / m);
    for (int it = 0; it < 20000; ++it) {
        const Eigen::VectorXd grad = v.transpose() * (v * w - Eigen::VectorXd(p));
        const Eigen::VectorXd next = numerics::project_to_simplex(w - grad / lipschitz);
        const double change = (next - w).lpNorm<Eigen::Infinity>();
        w = next;
        if (change <= 1e-15) break;
    }
    return (v * w - Eigen::VectorXd(p)).norm();
}

double cross(const Vec& o, const Vec& a, const Vec& b) {
    return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0));
}

double segment_distance(const Vec& a, const Vec& b, const Vec& p) {
    const Vec ab = b - a;
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (a + s * ab - p).norm();
}

}  // namespace

nlohmann::json SuperdiffSet::to_json() const {
    auto as_array = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::json j;
    j["point"] = as_array(x);
    j["vertices"] = nlohmann::json::array();
    for (const Vec& v : hull) j["vertices"].push_back(as_array(v));
    j["limiting"] = nlohmann::json::array();
    for (const Vec& v : limiting) j["limiting"].push_back(as_array(v));
    j["diameter"] = diameter;
    return j;
}

bool is_differentiable_node(const GridFunction& u, std::size_t flat, const RegularityOptions& options) {
    const GridSpec& spec = u.spec();
    for (int axis = 0; axis < u.dim(); ++axis) {
        double f[5];
        for (int s = -2; s <= 2; ++s) {
            const auto idx = shifted(spec, flat, axis, s);
            if (!idx) return false;
            f[s + 2] = u[*idx];
        }
        const double h = spec.spacing(axis);
        // Projection onto the discrete cubic and quartic orthogonal polynomials.
        const double a[5] = {-1.0, 2.0, 0.0, -2.0, 1.0};
        const double b[5] = {1.0, -4.0, 6.0, -4.0, 1.0};
        double fa = 0.0, fb = 0.0;
        for (int i = 0; i < 5; ++i) {
            fa += f[i] * a[i];
            fb += f[i] * b[i];
        }
        double residual = 0.0;
        for (int i = 0; i < 5; ++i) residual = std::max(residual, std::abs(fa / 10.0 * a[i] + fb / 70.0 * b[i]));
        if (residual > options.fit_factor * h * h) return false;
        const double spread = std::abs((f[3] - f[2]) - (f[2] - f[1])) / h;
        if (spread > options.spread_factor * h) return false;
    }
    return true;
}

Vec node_gradient(const GridFunction& u, std::size_t flat) {
    Vec g(u.dim());
    for (int axis = 0; axis < u.dim(); ++axis) {
        g(axis) = (u.neighbor(flat, axis, 1) - u.neighbor(flat, axis, -1)) / (2.0 * u.spec().spacing(axis));
    }
    return g;
}

std::vector<Vec> limiting_differentials(const GridFunction& u, const Vec& x, double radius, double cluster_tol,
                                        const RegularityOptions& options) {
    const GridSpec& spec = u.spec();
    const int n = u.dim();
    if (radius < 2.0 * spec.min_spacing() * (1.0 - 1e-12)) {
        throw Error(ErrorKind::kInvalidArgument, "radius must be at least twice the spacing");
    }
    std::vector<Vec> grads;
    std::vector<Vec> offsets;
    for (const auto& [flat, d] : nodes_near(spec, x, radius)) {
        if (!is_differentiable_node(u, flat, options)) continue;
        grads.push_back(node_gradient(u, flat));
        offsets.push_back(d);
    }
    if (static_cast<int>(grads.size()) < n + 1) {
        throw Error(ErrorKind::kInsufficientSamples, "too few differentiable nodes near x");
    }

    // Single-linkage clustering.
    const std::size_t m = grads.size();
    std::vector<std::size_t> parent(m);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            if ((grads[i] - grads[j]).norm() <= cluster_tol) parent[find(i)] = find(j);
        }
    }
    std::vector<std::vector<std::size_t>> clusters;
    std::vector<long> slot(m, -1);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<long>(clusters.size());
            clusters.emplace_back();
        }
        clusters[static_cast<std::size_t>(slot[r])].push_back(i);
    }

    std::vector<Vec> limits;
    for (const auto& members : clusters) {
        const int count = static_cast<int>(members.size());
        // Quadratic fit when the cluster is large enough, affine otherwise.
        const int quadratic_terms = (n + 1) * (n + 2) / 2;
        const bool quadratic = count >= quadratic_terms + 2;
        if (quadratic || count >= n + 2) {
            const int terms = quadratic ? quadratic_terms : n + 1;
            Eigen::MatrixXd design(count, terms);
            Eigen::MatrixXd rhs(count, n);
            for (int r = 0; r < count; ++r) {
                const Vec& d = offsets[members[r]];
                design(r, 0) = 1.0;
                design.block(r, 1, 1, n) = d.transpose();
                if (quadratic) {
                    int c = n + 1;
                    for (int i = 0; i < n; ++i) {
                        for (int j = i; j < n; ++j) design(r, c++) = d(i) * d(j);
                    }
                }
                rhs.row(r) = grads[members[r]].transpose();
            }
            const Eigen::MatrixXd coef = design.colPivHouseholderQr().solve(rhs);
            limits.push_back(coef.row(0).transpose());
        } else {
            std::size_t nearest = members.front();
            for (std::size_t i : members) {
                if (offsets[i].norm() < offsets[nearest].norm()) nearest = i;
            }
            limits.push_back(grads[nearest]);
        }
    }
    std::sort(limits.begin(), limits.end(), [](const Vec& a, const Vec& b) {
        for (int i = 0; i < a.size(); ++i) {
            if (a(i) != b(i)) return a(i) < b(i);
        }
        return false;
    });
    return limits;
}

std::vector<Vec> convex_hull(const std::vector<Vec>& input, double tol) {
    std::vector<Vec> points;
    for (const Vec& p : input) {
        bool duplicate = false;
        for (const Vec& q : points) {
            if ((p - q).norm() <= tol) duplicate = true;
        }
        if (!duplicate) points.push_back(p);
    }
    if (points.size() <= 1) return points;
    const int n = static_cast<int>(points.front().size());
    if (n == 1) {
        auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                            [](const Vec& a, const Vec& b) { return a(0) < b(0); });
        return {*lo, *hi};
    }
    if (n == 2) {
        std::size_t start = 0;
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (points[i](1) < points[start](1) ||
                (points[i](1) == points[start](1) && points[i](0) < points[start](0))) {
                start = i;
            }
        }
        std::vector<Vec> hull;
        std::size_t current = start;
        for (std::size_t guard = 0; guard <= points.size(); ++guard) {
            hull.push_back(points[current]);
            std::size_t next = current == 0 ? 1 : 0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (i == current) continue;
                const double c = cross(points[current], points[next], points[i]);
                const bool farther = (points[i] - points[current]).norm() > (points[next] - points[current]).norm();
                if (c < -tol || (std::abs(c) <= tol && farther)) next = i;
            }
            current = next;
            if (current == start) break;
        }
        return hull;
    }
    std::vector<Vec> vertices;
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::vector<Vec> others;
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j != i) others.push_back(points[j]);
        }
        if (distance_to_hull(others, points[i]) > std::max(tol, 1e-9)) vertices.push_back(points[i]);
    }
    return vertices;
}

bool on_hull_boundary(const std::vector<Vec>& hull, const Vec& p, double tol) {
    if (hull.empty()) return false;
    const int n = static_cast<int>(p.size());
    if (hull.size() == 1) return (hull.front() - p).norm() <= tol;
    if (n == 1) return std::abs(p(0) - hull.front()(0)) <= tol || std::abs(p(0) - hull.back()(0)) <= tol;
    if (n == 2) {
        if (hull.size() == 2) return segment_distance(hull[0], hull[1], p) <= tol;
        for (std::size_t i = 0; i < hull.size(); ++i) {
            if (segment_distance(hull[i], hull[(i + 1) % hull.size()], p) <= tol) return true;
        }
        return false;
    }
    for (const Vec& v : hull) {
        if ((v - p).norm() <= tol) return true;
    }
    return false;
}

SuperdiffSet superdifferential(const GridFunction& u, const Vec& x, double radius, double cluster_tol,
                               const RegularityOptions& options) {
    const GridSpec& spec = u.spec();
    const double bound = options.semiconcavity_bound ? *options.semiconcavity_bound : 0.5 / spec.min_spacing();
    for (const auto& [flat, d] : nodes_near(spec, x, radius)) {
        for (int axis = 0; axis < u.dim(); ++axis) {
            const double d2 = second_difference(u, flat, axis);
            if (std::isfinite(d2) && d2 > bound) {
                throw Error(ErrorKind::kNotSemiconcave, "second difference exceeds the semiconcavity bound");
            }
        }
    }
    SuperdiffSet set;
    set.x = x;
    set.limiting = limiting_differentials(u, x, radius, cluster_tol, options);
    set.hull = convex_hull(set.limiting);
    for (std::size_t i = 0; i < set.hull.size(); ++i) {
        for (std::size_t j = i + 1; j < set.hull.size(); ++j) {
            set.diameter = std::max(set.diameter, (set.hull[i] - set.hull[j]).norm());
        }
    }
    return set;
}

HMinimum min_H_over_superdiff(const Hamiltonian& hamiltonian, double t, const Vec& x, const SuperdiffSet& set) {
    if (set.hull.empty()) throw Error(ErrorKind::kInvalidArgument, "empty superdifferential");
    const int m = static_cast<int>(set.hull.size());
    const int n = static_cast<int>(x.size());
    Eigen::MatrixXd v(n, m);
    for (int j = 0; j < m; ++j) v.col(j) = set.hull[j];
    auto q_of = [&](const Eigen::VectorXd& w) -> Vec { return v * w; };
    auto grad = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
        return v.transpose() * Eigen::VectorXd(hamiltonian.grad_p(t, x, q_of(w)));
    };

    HMinimum out;
    // Projected gradient; the step is accepted when the gradient change along
    // the move satisfies the local Lipschitz bound, which avoids comparing
    // nearly equal function values.
    Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / m);
    Eigen::VectorXd g = grad(w);
    double step = 1.0;
    int it = 0;
    for (; it < 20000 && m > 1; ++it) {
        bool accepted = false;
        Eigen::VectorXd next;
        Eigen::VectorXd g_next;
        for (int ls = 0; ls < 80; ++ls, step *= 0.5) {
            next = numerics::project_to_simplex(w - step * g);
            g_next = grad(next);
            const Eigen::VectorXd d = next - w;
            if ((g_next - g).dot(d) <= d.squaredNorm() / step) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        const double moved = (q_of(next) - q_of(w)).norm();
        w = next;
        g = g_next;
        step *= 2.0;
        if (moved <= 1e-15 * (1.0 + q_of(w).norm())) break;
    }
    out.q = q_of(w);
    out.value = hamiltonian.eval(t, x, out.q);
    out.iterations = it;

    // Pairwise Frank-Wolfe from the best vertex.
    int start = 0;
    for (int j = 1; j < m; ++j) {
        if (hamiltonian.eval(t, x, set.hull[j]) < hamiltonian.eval(t, x, set.hull[start])) start = j;
    }
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
    u(start) = 1.0;
    for (int k = 0; k < 20000 && m > 1; ++k) {
        const Eigen::VectorXd g = grad(u);
        int toward = 0;
        int away = -1;
        for (int j = 0; j < m; ++j) {
            if (g(j) < g(toward)) toward = j;
            if (u(j) > 0.0 && (away < 0 || g(j) > g(away))) away = j;
        }
        if (g(away) - g(toward) <= 1e-15 * (1.0 + g.cwiseAbs().maxCoeff())) break;
        const Vec dir = set.hull[toward] - set.hull[away];
        const Vec q0 = q_of(u);
        const double gamma_max = u(away);
        auto slope = [&](double gamma) { return Vec(hamiltonian.grad_p(t, x, Vec(q0 + gamma * dir))).dot(dir); };
        const double s0 = slope(0.0);
        const double s1 = slope(gamma_max);
        double gamma = gamma_max;
        if (s0 >= 0.0) break;
        if (s1 > 0.0) gamma = numerics::bracketed_root(slope, 0.0, gamma_max, s0, s1, 1e-16);
        u(toward) += gamma;
        u(away) -= gamma;
        if (gamma == gamma_max) u(away) = 0.0;
        if (gamma * dir.norm() <= 1e-16) break;
    }
    out.q_fw = q_of(u);
    if ((out.q - out.q_fw).norm() > 1e-8) {
        throw Error(ErrorKind::kNonConvergence, "projected gradient and Frank-Wolfe disagree");
    }
    return out;
}

std::vector<std::size_t> singular_set(const GridFunction& u, double diam_threshold,
                                      const RegularityOptions& options) {
    const GridSpec& spec = u.spec();
    const int n = u.dim();
    const double h = spec.min_spacing();
    std::vector<char> keep(u.size(), 0);
    parallel_for(u.size(), [&](std::size_t f) {
        if (near_edge(spec, f, 2) || is_differentiable_node(u, f, options)) return;
        int axis = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            const double d2 = second_difference(u, f, i);
            if (d2 < best) {
                best = d2;
                axis = i;
            }
        }
        const auto lo = shifted(spec, f, axis, -1);
        const auto hi = shifted(spec, f, axis, 1);
        if (!(best < second_difference(u, *lo, axis) && best <= second_difference(u, *hi, axis))) return;
        try {
            const SuperdiffSet set =
                superdifferential(u, spec.node(f), options.radius_factor * h, options.cluster_factor * h, options);
            if (set.diameter > diam_threshold) keep[f] = 1;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::kInsufficientSamples) throw;
        }
    });
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < keep.size(); ++f) {
        if (keep[f]) out.push_back(f);
    }
    return out;
}

SemiconcavityEstimate semiconcavity_constant(const GridFunction& u, const Vec& lo, const Vec& hi,
                                             const std::vector<std::size_t>& masked_nodes) {
    const GridSpec& spec = u.spec();
    const int n = u.dim();
    std::vector<Index> offsets;
    Index k{-2, -2, -2};
    for (int i = n; i < kMaxDim; ++i) k[i] = 0;
    while (true) {
        // Keep one of each +/- pair: first nonzero entry positive.
        int first = 0;
        for (int i = 0; i < n; ++i) {
            if (k[i] != 0) {
                first = k[i];
                break;
            }
        }
        if (first > 0) offsets.push_back(k);
        int axis = n - 1;
        while (axis >= 0) {
            if (++k[axis] <= 2) break;
            k[axis] = -2;
            --axis;
        }
        if (axis < 0) break;
    }
    std::vector<Vec> masked_points;
    for (std::size_t f : masked_nodes) masked_points.push_back(spec.node(f));
    const double h = spec.min_spacing();

    SemiconcavityEstimate est;
    est.constant = -std::numeric_limits<double>::infinity();
    est.masked_max = -std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < u.size(); ++f) {
        const Vec x = spec.node(f);
        bool inside = true;
        for (int i = 0; i < n; ++i) {
            if (x(i) < lo(i) - 1e-12 || x(i) > hi(i) + 1e-12) inside = false;
        }
        if (!inside) continue;
        const auto idx = spec.multi_index(f);
        for (const Index& off : offsets) {
            Index plus = idx, minus = idx;
            Vec z(n);
            bool valid = true;
            for (int i = 0; i < n; ++i) {
                plus[i] += off[i];
                minus[i] -= off[i];
                z(i) = off[i] * spec.spacing(i);
                if (spec.boundary == BoundaryPolicy::kPeriodic) {
                    plus[i] = ((plus[i] % spec.counts[i]) + spec.counts[i]) % spec.counts[i];
                    minus[i] = ((minus[i] % spec.counts[i]) + spec.counts[i]) % spec.counts[i];
                } else if (plus[i] < 0 || plus[i] >= spec.counts[i] || minus[i] < 0 || minus[i] >= spec.counts[i]) {
                    valid = false;
                }
            }
            if (!valid) continue;
            const double ratio =
                (u[spec.flat_index(plus)] + u[spec.flat_index(minus)] - 2.0 * u[f]) / z.squaredNorm();
            bool crosses = false;
            for (const Vec& m : masked_points) {
                Vec d = m - x;
                if (spec.boundary == BoundaryPolicy::kPeriodic) {
                    for (int i = 0; i < n; ++i) {
                        const double period = spec.counts[i] * spec.spacing(i);
                        d(i) -= period * std::round(d(i) / period);
                    }
                }
                if (segment_distance(-z, z, d) <= h) crosses = true;
            }
            if (crosses) {
                ++est.masked;
                est.masked_max = std::max(est.masked_max, ratio);
            } else {
                ++est.samples;
                est.constant = std::max(est.constant, ratio);
            }
        }
    }
    if (est.samples == 0) est.constant = 0.0;
    if (est.masked == 0) est.masked_max = 0.0;
    return est;
}

}  // namespace hjreg
