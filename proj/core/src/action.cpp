#include "hjreg/action.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>

#include <Eigen/LU>

#include "hjreg/error.hpp"
#include "hjreg/numerics.hpp"

namespace hjreg {

namespace {

struct Hermite {
    double h00, h10, h01, h11;
};

Hermite basis(double s) {
    const double s2 = s * s;
    const double s3 = s2 * s;
    return {2 * s3 - 3 * s2 + 1, s3 - 2 * s2 + s, -2 * s3 + 3 * s2, s3 - s2};
}

Hermite basis_d1(double s) {
    const double s2 = s * s;
    return {6 * s2 - 6 * s, 3 * s2 - 4 * s + 1, -6 * s2 + 6 * s, 3 * s2 - 2 * s};
}

Hermite basis_d2(double s) { return {12 * s - 6, 6 * s - 4, -12 * s + 6, 6 * s - 2}; }

struct Segment {
    const Vec& q0;
    const Vec& v0;
    const Vec& q1;
    const Vec& v1;
    double h;

    [[nodiscard]] Vec position(double s) const {
        const Hermite b = basis(s);
        return b.h00 * q0 + b.h10 * h * v0 + b.h01 * q1 + b.h11 * h * v1;
    }
    [[nodiscard]] Vec velocity(double s) const {
        const Hermite b = basis_d1(s);
        return (b.h00 * q0 + b.h10 * h * v0 + b.h01 * q1 + b.h11 * h * v1) / h;
    }
    [[nodiscard]] Vec acceleration(double s) const {
        const Hermite b = basis_d2(s);
        return (b.h00 * q0 + b.h10 * h * v0 + b.h01 * q1 + b.h11 * h * v1) / (h * h);
    }
};

std::size_t locate(const std::vector<double>& times, double tau) {
    const auto it = std::upper_bound(times.begin(), times.end(), tau);
    const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - times.begin(), 1)) - 1;
    return std::min(idx, times.size() - 2);
}

/// Three-point finite-difference node velocities of a polygon on a uniform grid.
std::vector<Vec> fd_velocities(const std::vector<Vec>& q, double h) {
    const std::size_t n = q.size() - 1;
    std::vector<Vec> v(q.size());
    if (n == 1) {
        v[0] = v[1] = (q[1] - q[0]) / h;
        return v;
    }
    v[0] = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * h);
    v[n] = (3.0 * q[n] - 4.0 * q[n - 1] + q[n - 2]) / (2.0 * h);
    for (std::size_t i = 1; i < n; ++i) v[i] = (q[i + 1] - q[i - 1]) / (2.0 * h);
    return v;
}

class ActionProblem {
public:
    ActionProblem(const TonelliLagrangian& l, double s, double t, const Vec& x, const Vec& y, int segments)
        : l_(l), s_(s), x_(x), y_(y), n_(l.dim()), segments_(segments), h_((t - s) / segments) {
        times_.resize(segments + 1);
        for (int k = 0; k <= segments; ++k) times_[k] = s + k * h_;
        times_.back() = t;
    }

    [[nodiscard]] const std::vector<double>& times() const { return times_; }
    [[nodiscard]] double step() const { return h_; }

    std::vector<Vec> nodes_from(const Eigen::VectorXd& z) const {
        std::vector<Vec> q(segments_ + 1);
        q.front() = x_;
        q.back() = y_;
        for (int i = 1; i < segments_; ++i) q[i] = z.segment((i - 1) * n_, n_);
        return q;
    }

    Eigen::VectorXd pack_nodes(const std::vector<Vec>& q) const {
        Eigen::VectorXd z((segments_ - 1) * n_);
        for (int i = 1; i < segments_; ++i) z.segment((i - 1) * n_, n_) = q[i];
        return z;
    }

    /// Discrete action of the polygon through z and its gradient.
    double polygon_action(const Eigen::VectorXd& z, Eigen::VectorXd* grad) const {
        const std::vector<Vec> q = nodes_from(z);
        if (grad) grad->setZero(z.size());
        double total = 0.0;
        for (int k = 0; k < segments_; ++k) {
            const Vec v = (q[k + 1] - q[k]) / h_;
            for (int j = 0; j < 3; ++j) {
                const double sigma = numerics::GaussRule3::nodes[j];
                const double w = numerics::GaussRule3::weights[j] * h_;
                const double tau = times_[k] + sigma * h_;
                const Vec pos = (1.0 - sigma) * q[k] + sigma * q[k + 1];
                total += w * l_.eval(tau, pos, v);
                if (!grad) continue;
                const Vec lx = l_.grad_x(tau, pos, v);
                const Vec lv = l_.grad_v(tau, pos, v);
                if (k > 0) grad->segment((k - 1) * n_, n_) += w * ((1.0 - sigma) * lx - lv / h_);
                if (k + 1 < segments_) grad->segment(k * n_, n_) += w * (sigma * lx + lv / h_);
            }
        }
        return total;
    }

    // Collocation unknowns: interior nodes q_1..q_{N-1}, then all velocities v_0..v_N.
    [[nodiscard]] int unknowns() const { return 2 * segments_ * n_; }
    [[nodiscard]] int q_offset(int i) const { return (i - 1) * n_; }
    [[nodiscard]] int v_offset(int i) const { return (segments_ - 1) * n_ + i * n_; }

    Eigen::VectorXd pack(const std::vector<Vec>& q, const std::vector<Vec>& v) const {
        Eigen::VectorXd u(unknowns());
        for (int i = 1; i < segments_; ++i) u.segment(q_offset(i), n_) = q[i];
        for (int i = 0; i <= segments_; ++i) u.segment(v_offset(i), n_) = v[i];
        return u;
    }

    void unpack(const Eigen::VectorXd& u, std::vector<Vec>& q, std::vector<Vec>& v) const {
        q.assign(segments_ + 1, Vec());
        v.assign(segments_ + 1, Vec());
        q.front() = x_;
        q.back() = y_;
        for (int i = 1; i < segments_; ++i) q[i] = u.segment(q_offset(i), n_);
        for (int i = 0; i <= segments_; ++i) v[i] = u.segment(v_offset(i), n_);
    }

    /// Euler-Lagrange defect d/dtau L_v - L_x at the two collocation points of segment k.
    void segment_residual(int k, const Vec& q0, const Vec& v0, const Vec& q1, const Vec& v1,
                          Eigen::Ref<Eigen::VectorXd> out) const {
        const Segment seg{q0, v0, q1, v1, h_};
        for (int j = 0; j < 2; ++j) {
            const double sigma = numerics::kGauss2Nodes[j];
            const double tau = times_[k] + sigma * h_;
            const Vec pos = seg.position(sigma);
            const Vec vel = seg.velocity(sigma);
            const Vec acc = seg.acceleration(sigma);
            out.segment(j * n_, n_) = l_.grad_vt(tau, pos, vel) + l_.hess_vx(tau, pos, vel) * vel +
                                      l_.hess_vv(tau, pos, vel) * acc - l_.grad_x(tau, pos, vel);
        }
    }

    Eigen::VectorXd residual(const std::vector<Vec>& q, const std::vector<Vec>& v) const {
        Eigen::VectorXd r(unknowns());
        for (int k = 0; k < segments_; ++k) {
            segment_residual(k, q[k], v[k], q[k + 1], v[k + 1], r.segment(2 * k * n_, 2 * n_));
        }
        return r;
    }

    /// Jacobian by central differences; each segment only couples its own endpoints.
    Eigen::MatrixXd jacobian(const std::vector<Vec>& q, const std::vector<Vec>& v) const {
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(unknowns(), unknowns());
        Eigen::VectorXd plus(2 * n_), minus(2 * n_);
        for (int k = 0; k < segments_; ++k) {
            Vec local[4] = {q[k], v[k], q[k + 1], v[k + 1]};
            const int cols[4] = {k > 0 ? q_offset(k) : -1, v_offset(k), k + 1 < segments_ ? q_offset(k + 1) : -1,
                                 v_offset(k + 1)};
            for (int a = 0; a < 4; ++a) {
                if (cols[a] < 0) continue;
                for (int c = 0; c < n_; ++c) {
                    const double saved = local[a](c);
                    const double step = 1e-6 * (1.0 + std::abs(saved));
                    local[a](c) = saved + step;
                    segment_residual(k, local[0], local[1], local[2], local[3], plus);
                    local[a](c) = saved - step;
                    segment_residual(k, local[0], local[1], local[2], local[3], minus);
                    local[a](c) = saved;
                    jac.block(2 * k * n_, cols[a] + c, 2 * n_, 1) = (plus - minus) / (2.0 * step);
                }
            }
        }
        return jac;
    }

    double hermite_action(const std::vector<Vec>& q, const std::vector<Vec>& v) const {
        double total = 0.0;
        for (int k = 0; k < segments_; ++k) {
            const Segment seg{q[k], v[k], q[k + 1], v[k + 1], h_};
            // Gauss rule on each half segment.
            for (int half = 0; half < 2; ++half) {
                for (int j = 0; j < 3; ++j) {
                    const double sigma = 0.5 * (half + numerics::GaussRule3::nodes[j]);
                    const double tau = times_[k] + sigma * h_;
                    total += 0.5 * h_ * numerics::GaussRule3::weights[j] *
                             l_.eval(tau, seg.position(sigma), seg.velocity(sigma));
                }
            }
        }
        return total;
    }

    [[nodiscard]] int segments() const { return segments_; }

private:
    const TonelliLagrangian& l_;
    double s_;
    Vec x_;
    Vec y_;
    int n_;
    int segments_;
    double h_;
    std::vector<double> times_;
};

struct Candidate {
    double value;
    double residual;
    std::vector<Vec> q;
    std::vector<Vec> v;
};

std::optional<Candidate> solve_from(const ActionProblem& problem, const std::vector<Vec>& start,
                                    const ActionOptions& options) {
    numerics::LbfgsOptions lb;
    lb.max_iterations = options.descent_iterations;
    lb.gradient_tol = 1e-10;
    const auto descent = numerics::lbfgs_minimize(
        [&](const Eigen::VectorXd& z, Eigen::VectorXd* g) { return problem.polygon_action(z, g); },
        problem.pack_nodes(start), lb);
    if (!descent.x.allFinite()) return std::nullopt;

    std::vector<Vec> q = problem.nodes_from(descent.x);
    std::vector<Vec> v = fd_velocities(q, problem.step());
    Eigen::VectorXd u = problem.pack(q, v);
    Eigen::VectorXd r = problem.residual(q, v);
    double norm = r.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < options.newton_iterations && norm > options.tol; ++it) {
        const Eigen::MatrixXd jac = problem.jacobian(q, v);
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        const Eigen::VectorXd delta = lu.solve(-r);
        if (!delta.allFinite()) return std::nullopt;
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
            const Eigen::VectorXd trial = u + alpha * delta;
            std::vector<Vec> tq, tv;
            problem.unpack(trial, tq, tv);
            const Eigen::VectorXd tr = problem.residual(tq, tv);
            const double tn = tr.lpNorm<Eigen::Infinity>();
            if (std::isfinite(tn) && (tn < (1.0 - 1e-4 * alpha) * norm || tn <= options.tol)) {
                u = trial;
                q = std::move(tq);
                v = std::move(tv);
                r = tr;
                norm = tn;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    if (!(norm <= options.tol)) return std::nullopt;
    return Candidate{problem.hermite_action(q, v), norm, std::move(q), std::move(v)};
}

bool lexicographically_less(const Vec& a, const Vec& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (a(i) != b(i)) return a(i) < b(i);
    }
    return false;
}

}  // namespace

Vec Curve::position(double tau) const {
    const std::size_t k = locate(times, tau);
    const double h = times[k + 1] - times[k];
    const double sigma = (tau - times[k]) / h;
    if (interpolation == Interpolation::kPiecewiseLinear) return (1.0 - sigma) * nodes[k] + sigma * nodes[k + 1];
    return Segment{nodes[k], velocities[k], nodes[k + 1], velocities[k + 1], h}.position(sigma);
}

Vec Curve::velocity(double tau) const {
    const std::size_t k = locate(times, tau);
    const double h = times[k + 1] - times[k];
    const double sigma = (tau - times[k]) / h;
    if (interpolation == Interpolation::kPiecewiseLinear) {
        return (1.0 - sigma) * velocities[k] + sigma * velocities[k + 1];
    }
    return Segment{nodes[k], velocities[k], nodes[k + 1], velocities[k + 1], h}.velocity(sigma);
}

Vec Curve::acceleration(double tau) const {
    const std::size_t k = locate(times, tau);
    const double h = times[k + 1] - times[k];
    const double sigma = (tau - times[k]) / h;
    if (interpolation == Interpolation::kPiecewiseLinear) return (velocities[k + 1] - velocities[k]) / h;
    return Segment{nodes[k], velocities[k], nodes[k + 1], velocities[k + 1], h}.acceleration(sigma);
}

DualArc dual_arc(const TonelliLagrangian& lagrangian, const Curve& curve) {
    if (curve.times.size() < 2) throw Error(ErrorKind::kInvalidArgument, "curve needs at least two nodes");
    DualArc arc;
    arc.times = curve.times;
    arc.momenta.reserve(curve.times.size());
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        arc.momenta.push_back(lagrangian.grad_v(curve.times[i], curve.nodes[i], curve.velocities[i]));
    }
    return arc;
}

FundamentalSolution minimize_action(const TonelliLagrangian& lagrangian, double s, double t, const Vec& x,
                                    const Vec& y, const ActionOptions& options) {
    const int n = lagrangian.dim();
    if (x.size() != n || y.size() != n) throw Error(ErrorKind::kInvalidArgument, "endpoint dimension mismatch");
    if (!(s < t)) throw Error(ErrorKind::kInvalidArgument, "minimize_action needs s < t");
    if (options.n_segments < 2) throw Error(ErrorKind::kInvalidArgument, "n_segments must be at least 2");
    lagrangian.require_in_window(s);
    lagrangian.require_in_window(t);

    const ActionProblem problem(lagrangian, s, t, x, y, options.n_segments);
    const int segments = options.n_segments;
    std::vector<std::vector<Vec>> starts;
    std::vector<Vec> line(segments + 1);
    for (int i = 0; i <= segments; ++i) {
        const double sigma = static_cast<double>(i) / segments;
        line[i] = (1.0 - sigma) * x + sigma * y;
    }
    starts.push_back(line);
    if (lagrangian.multi_well() && t - s > options.multistart_threshold) {
        std::mt19937_64 rng(options.seed);
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> amplitude(0.5, 2.0);
        for (int b = 0; b < options.multistart_bent; ++b) {
            Vec dir(n);
            for (int i = 0; i < n; ++i) dir(i) = normal(rng);
            dir /= std::max(dir.norm(), 1e-12);
            const double amp = amplitude(rng) * (1.0 + (y - x).norm());
            std::vector<Vec> bent = line;
            for (int i = 1; i < segments; ++i) {
                bent[i] += amp * std::sin(M_PI * i / segments) * dir;
            }
            starts.push_back(std::move(bent));
        }
    }

    std::vector<Candidate> candidates;
    for (const auto& start : starts) {
        if (auto c = solve_from(problem, start, options)) candidates.push_back(std::move(*c));
    }
    if (candidates.empty()) {
        throw Error(ErrorKind::kNoConvergence, "Euler-Lagrange refinement stalled above tolerance");
    }
    double best = candidates.front().value;
    for (const auto& c : candidates) best = std::min(best, c.value);
    const double mid_time = 0.5 * (s + t);
    const Candidate* chosen = nullptr;
    Vec chosen_mid;
    for (const auto& c : candidates) {
        if (c.value > best + options.tol) continue;
        Curve tmp{problem.times(), c.q, c.v, Interpolation::kHermite};
        const Vec mid = tmp.position(mid_time);
        if (!chosen || lexicographically_less(mid, chosen_mid)) {
            chosen = &c;
            chosen_mid = mid;
        }
    }

    FundamentalSolution fs;
    fs.s = s;
    fs.t = t;
    fs.x = x;
    fs.y = y;
    fs.value = chosen->value;
    fs.residual = chosen->residual;
    fs.minimizer = Curve{problem.times(), chosen->q, chosen->v, Interpolation::kHermite};
    fs.dual = dual_arc(lagrangian, fs.minimizer);
    fs.grad_y = fs.dual.momenta.back();
    fs.grad_x = -fs.dual.momenta.front();
    fs.starts_tried = static_cast<int>(starts.size());
    const double h = problem.step();
    for (int k = 0; k < segments; ++k) {
        const Segment seg{chosen->q[k], chosen->v[k], chosen->q[k + 1], chosen->v[k + 1], h};
        fs.velocity_lipschitz =
            std::max({fs.velocity_lipschitz, seg.acceleration(0.0).norm(), seg.acceleration(1.0).norm()});
    }
    return fs;
}

std::pair<Vec, Vec> gradients_A(const FundamentalSolution& solution, double tol,
                                const std::optional<CertifiedCone>& cone) {
    if (!(solution.residual <= tol)) {
        throw Error(ErrorKind::kNoConvergence, "fundamental solution residual above tolerance");
    }
    if (cone && !cone->contains(solution.t - solution.s, (solution.y - solution.x).norm())) {
        throw Error(ErrorKind::kConeViolation, "(t - s, |y - x|) outside the certified cone");
    }
    return {solution.grad_x, solution.grad_y};
}

void write_curve_csv(std::ostream& out, const Curve& curve, const DualArc& dual) {
    const int n = curve.nodes.empty() ? 0 : static_cast<int>(curve.nodes.front().size());
    out << "tau";
    for (int i = 1; i <= n; ++i) out << ",x" << i;
    for (int i = 1; i <= n; ++i) out << ",p" << i;
    out << '\n' << std::setprecision(17);
    for (std::size_t k = 0; k < curve.times.size(); ++k) {
        out << curve.times[k];
        for (int i = 0; i < n; ++i) out << ',' << curve.nodes[k](i);
        for (int i = 0; i < n; ++i) out << ',' << dual.momenta[k](i);
        out << '\n';
    }
}

}  // namespace hjreg
