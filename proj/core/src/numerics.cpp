#include "hjreg/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <vector>

namespace hjreg::numerics {

LbfgsResult lbfgs_minimize(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& options) {
    LbfgsResult result;
    const Eigen::Index n = x0.size();
    Eigen::VectorXd x = std::move(x0);
    Eigen::VectorXd g(n);
    double fx = f(x, &g);

    std::deque<Eigen::VectorXd> s_hist;
    std::deque<Eigen::VectorXd> y_hist;
    std::deque<double> rho_hist;

    Eigen::VectorXd g_new(n);
    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tol) {
            result.converged = true;
            break;
        }
        // two-loop recursion
        Eigen::VectorXd q = g;
        std::vector<double> alpha(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) {
            const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        } else {
            q *= 1.0 / std::max(1.0, g.norm());
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += s_hist[i] * (alpha[i] - beta);
        }
        Eigen::VectorXd direction = -q;
        double slope = g.dot(direction);
        if (slope >= 0.0) {
            direction = -g;
            slope = -g.squaredNorm();
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        double step = 1.0;
        double f_new = 0.0;
        Eigen::VectorXd x_new(n);
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = x + step * direction;
            f_new = f(x_new, &g_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        Eigen::VectorXd s = x_new - x;
        Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        const double decrease = fx - f_new;
        x = std::move(x_new);
        g = g_new;
        fx = f_new;
        if (sy > 1e-300) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > options.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        if (decrease <= options.relative_decrease_tol * (1.0 + std::abs(fx))) {
            result.converged = g.lpNorm<Eigen::Infinity>() <= std::sqrt(options.gradient_tol);
            ++iter;
            break;
        }
    }
    result.x = std::move(x);
    result.value = fx;
    result.gradient_norm = g.lpNorm<Eigen::Infinity>();
    result.iterations = iter;
    if (result.gradient_norm <= options.gradient_tol) result.converged = true;
    return result;
}

NelderMeadResult nelder_mead_minimize(const std::function<double(const Vec&)>& f, const Vec& x0,
                                      const Vec& lo, const Vec& hi,
                                      const NelderMeadOptions& options) {
    const int n = static_cast<int>(x0.size());
    auto clamp = [&](Vec p) {
        for (int i = 0; i < n; ++i) p(i) = std::clamp(p(i), lo(i), hi(i));
        return p;
    };
    int evaluations = 0;
    auto eval = [&](const Vec& p) {
        ++evaluations;
        return f(p);
    };

    std::vector<Vec> simplex(n + 1);
    std::vector<double> values(n + 1);
    simplex[0] = clamp(x0);
    values[0] = eval(simplex[0]);
    for (int i = 0; i < n; ++i) {
        Vec p = simplex[0];
        p(i) += options.initial_step;
        if (p(i) > hi(i)) p(i) = simplex[0](i) - options.initial_step;
        simplex[i + 1] = clamp(p);
        values[i + 1] = eval(simplex[i + 1]);
    }

    std::vector<int> order(n + 1);
    while (evaluations < options.max_evaluations) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
        const int best = order.front();
        const int worst = order.back();
        const int second = order[n > 0 ? n - 1 : 0];

        double spread = 0.0;
        for (int i = 0; i <= n; ++i) spread = std::max(spread, (simplex[i] - simplex[best]).lpNorm<Eigen::Infinity>());
        const bool flat = std::abs(values[worst] - values[best]) <= options.f_tol * (1.0 + std::abs(values[best]));
        if (spread <= options.x_tol || (flat && spread <= 1e3 * options.x_tol)) {
            break;
        }

        Vec centroid = Vec::Zero(n);
        for (int i = 0; i <= n; ++i)
            if (i != worst) centroid += simplex[i];
        centroid /= static_cast<double>(n);

        const Vec reflected = clamp(centroid + (centroid - simplex[worst]));
        const double f_ref = eval(reflected);
        if (f_ref < values[best]) {
            const Vec expanded = clamp(centroid + 2.0 * (centroid - simplex[worst]));
            const double f_exp = eval(expanded);
            if (f_exp < f_ref) {
                simplex[worst] = expanded;
                values[worst] = f_exp;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_ref;
            }
            continue;
        }
        if (f_ref < values[second]) {
            simplex[worst] = reflected;
            values[worst] = f_ref;
            continue;
        }
        const bool outside = f_ref < values[worst];
        const Vec contracted = outside ? clamp(centroid + 0.5 * (reflected - centroid))
                                       : clamp(centroid + 0.5 * (simplex[worst] - centroid));
        const double f_con = eval(contracted);
        if (f_con < (outside ? f_ref : values[worst])) {
            simplex[worst] = contracted;
            values[worst] = f_con;
            continue;
        }
        for (int i = 0; i <= n; ++i) {
            if (i == best) continue;
            simplex[i] = clamp(simplex[best] + 0.5 * (simplex[i] - simplex[best]));
            values[i] = eval(simplex[i]);
        }
    }
    const auto it = std::min_element(values.begin(), values.end());
    const auto idx = static_cast<std::size_t>(it - values.begin());
    return {simplex[idx], *it, evaluations};
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& w) {
    const Eigen::Index n = w.size();
    std::vector<double> sorted(w.data(), w.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        cumulative += sorted[i];
        const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
        if (sorted[i] - candidate > 0.0) theta = candidate;
    }
    return (w.array() - theta).max(0.0).matrix();
}

double bracketed_root(const std::function<double(double)>& f, double a, double b, double fa,
                      double fb, double x_tol, int max_iterations) {
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    int side = 0;
    double c = a;
    double c_prev = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < max_iterations; ++i) {
        c = (fa * b - fb * a) / (fa - fb);
        const double lo = std::min(a, b);
        const double hi = std::max(a, b);
        if (!(c > lo && c < hi)) c = 0.5 * (a + b);
        if (std::abs(c - c_prev) <= x_tol || hi - lo <= x_tol) break;
        c_prev = c;
        const double fc = f(c);
        if (fc == 0.0) return c;
        if (fc * fb > 0.0) {
            b = c;
            fb = fc;
            if (side == -1) fa *= 0.5;
            side = -1;
        } else {
            a = c;
            fa = fc;
            if (side == 1) fb *= 0.5;
            side = 1;
        }
    }
    return c;
}

double min_eigenvalue(const Mat& m) {
    if (m.rows() == 1) return m(0, 0);
    Eigen::SelfAdjointEigenSolver<Mat> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

}  // namespace hjreg::numerics
