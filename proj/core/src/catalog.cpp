#include "hjreg/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hjreg/error.hpp"

namespace hjreg::catalog {

namespace {

constexpr double kWellPlateau = kDoubleWellCutStart * kDoubleWellCutStart * kDoubleWellCutStart *
                                    kDoubleWellCutStart / 4.0 -
                                kDoubleWellCutStart * kDoubleWellCutStart / 2.0;

struct Step {
    double s;
    double ds;  // derivative with respect to r
};

Step cut_step(double r) {
    const double width = kDoubleWellCutEnd - kDoubleWellCutStart;
    const double xi = std::clamp((r - kDoubleWellCutStart) / width, 0.0, 1.0);
    const double s = xi * xi * xi * (10.0 - 15.0 * xi + 6.0 * xi * xi);
    const double ds = 30.0 * xi * xi * (1.0 - xi) * (1.0 - xi) / width;
    return {s, ds};
}

Mat zero_mat(int n) { return Mat::Zero(n, n); }

}  // namespace

double potential_value(Potential potential, double tilt, const Vec& x) {
    switch (potential) {
        case Potential::kNone: return 0.0;
        case Potential::kCos: return x.array().cos().sum();
        case Potential::kDoubleWell: {
            const double r2 = x.squaredNorm();
            const double raw = r2 * r2 / 4.0 - r2 / 2.0 + tilt * x(0);
            const auto [s, ds] = cut_step(std::sqrt(r2));
            return (1.0 - s) * raw + s * kWellPlateau;
        }
    }
    return 0.0;
}

Vec potential_gradient(Potential potential, double tilt, const Vec& x) {
    const int n = static_cast<int>(x.size());
    switch (potential) {
        case Potential::kNone: return Vec::Zero(n);
        case Potential::kCos: return -x.array().sin().matrix();
        case Potential::kDoubleWell: {
            const double r2 = x.squaredNorm();
            const double r = std::sqrt(r2);
            const double raw = r2 * r2 / 4.0 - r2 / 2.0 + tilt * x(0);
            Vec grad_raw = (r2 - 1.0) * x;
            grad_raw(0) += tilt;
            const auto [s, ds] = cut_step(r);
            Vec g = (1.0 - s) * grad_raw;
            if (ds != 0.0) g += ds * (kWellPlateau - raw) * x / r;
            return g;
        }
    }
    return Vec::Zero(n);
}

std::pair<double, double> potential_bounds(Potential potential, double tilt, int dim) {
    switch (potential) {
        case Potential::kNone: return {0.0, 0.0};
        case Potential::kCos: return {-static_cast<double>(dim), static_cast<double>(dim)};
        case Potential::kDoubleWell: {
            const double reach = kDoubleWellCutEnd * std::abs(tilt);
            return {-0.25 - reach, 12.0 + reach};
        }
    }
    return {0.0, 0.0};
}

TonelliLagrangian free_particle(int dim) {
    MechanicalParams params;
    params.dim = dim;
    return mechanical(params);
}

TonelliLagrangian mechanical(const MechanicalParams& params) {
    const int n = params.dim;
    if (n < 1 || n > kMaxDim) throw Error(ErrorKind::kInvalidArgument, "dimension must be in [1, 3]");
    const Vec drift = params.drift.size() == 0 ? Vec::Zero(n) : params.drift;
    if (drift.size() != n) throw Error(ErrorKind::kInvalidArgument, "drift dimension mismatch");
    const Potential pot = params.potential;
    const double a = params.amplitude;
    const double c = params.shift;
    const double tilt = params.tilt;

    LagrangianParts parts;
    parts.dim = n;
    switch (pot) {
        case Potential::kNone: parts.name = "free"; break;
        case Potential::kCos: parts.name = "mechanical-cos"; break;
        case Potential::kDoubleWell: parts.name = "mechanical-double-well"; break;
    }
    parts.eval = [=](double, const Vec& x, const Vec& v) {
        return 0.5 * v.squaredNorm() + drift.dot(v) + a * potential_value(pot, tilt, x) + c;
    };
    parts.grad_t = [](double, const Vec&, const Vec&) { return 0.0; };
    parts.grad_x = [=](double, const Vec& x, const Vec&) -> Vec { return a * potential_gradient(pot, tilt, x); };
    parts.grad_v = [=](double, const Vec&, const Vec& v) -> Vec { return v + drift; };
    parts.hess_vv = [n](double, const Vec&, const Vec&) -> Mat { return Mat::Identity(n, n); };
    parts.hess_vx = [n](double, const Vec&, const Vec&) { return zero_mat(n); };
    parts.grad_vt = [n](double, const Vec&, const Vec&) -> Vec { return Vec::Zero(n); };

    const auto [p_inf, p_sup] = potential_bounds(pot, tilt, n);
    const double v_lo = std::min(a * p_inf, a * p_sup) + c;
    const double v_hi = std::max(a * p_inf, a * p_sup) + c;
    const double b2 = drift.squaredNorm();
    if (b2 == 0.0) {
        parts.growth.theta = [](double r) { return 0.5 * r * r; };
        parts.growth.theta_bar = [k = std::max(0.0, v_hi)](double r) { return 0.5 * r * r + k; };
        parts.growth.c0 = std::max(0.0, -v_lo);
    } else {
        parts.growth.theta = [](double r) { return 0.25 * r * r; };
        parts.growth.theta_bar = [k = 0.5 * b2 + std::max(0.0, v_hi)](double r) { return r * r + k; };
        parts.growth.c0 = std::max(0.0, b2 - v_lo);
    }
    parts.growth.c = 1.0;
    parts.time_independent = true;
    parts.multi_well = pot != Potential::kNone && a != 0.0;
    if (pot == Potential::kNone || a == 0.0) parts.quadratic = QuadraticFreeForm{drift, c, 0.0};
    return TonelliLagrangian(std::move(parts));
}

Hamiltonian mechanical_hamiltonian(const MechanicalParams& params) {
    const int n = params.dim;
    const Vec drift = params.drift.size() == 0 ? Vec::Zero(n) : params.drift;
    const Potential pot = params.potential;
    const double a = params.amplitude;
    const double c = params.shift;
    const double tilt = params.tilt;
    HamiltonianParts parts;
    parts.dim = n;
    parts.provenance = HamiltonianProvenance::kClosedForm;
    parts.eval = [=](double, const Vec& x, const Vec& p) {
        return 0.5 * (p - drift).squaredNorm() - a * potential_value(pot, tilt, x) - c;
    };
    parts.grad_p = [=](double, const Vec&, const Vec& p) -> Vec { return p - drift; };
    return Hamiltonian(std::move(parts));
}

TonelliLagrangian anisotropic_quadratic(const Vec& base, double eps) {
    const int n = static_cast<int>(base.size());
    if (n < 1 || n > kMaxDim || base.minCoeff() <= 0.0 || eps < 0.0) {
        throw Error(ErrorKind::kInvalidArgument, "anisotropic metric needs positive base and eps >= 0");
    }
    auto metric = [base, eps](const Vec& x) -> Vec {
        return (base.array() + eps * x.array().sin().square()).matrix();
    };
    LagrangianParts parts;
    parts.dim = n;
    parts.name = "anisotropic";
    parts.eval = [metric](double, const Vec& x, const Vec& v) {
        return 0.5 * (metric(x).array() * v.array().square()).sum();
    };
    parts.grad_t = [](double, const Vec&, const Vec&) { return 0.0; };
    parts.grad_x = [eps](double, const Vec& x, const Vec& v) -> Vec {
        return (0.5 * eps * (2.0 * x.array()).sin() * v.array().square()).matrix();
    };
    parts.grad_v = [metric](double, const Vec& x, const Vec& v) -> Vec {
        return (metric(x).array() * v.array()).matrix();
    };
    parts.hess_vv = [metric](double, const Vec& x, const Vec&) -> Mat { return metric(x).asDiagonal(); };
    parts.hess_vx = [eps](double, const Vec& x, const Vec& v) -> Mat {
        const Vec d = (eps * (2.0 * x.array()).sin() * v.array()).matrix();
        return d.asDiagonal();
    };
    parts.grad_vt = [n](double, const Vec&, const Vec&) -> Vec { return Vec::Zero(n); };
    const double lo = base.minCoeff();
    const double hi = base.maxCoeff() + eps;
    parts.growth.theta = [lo](double r) { return 0.5 * lo * r * r; };
    parts.growth.theta_bar = [hi](double r) { return 0.5 * hi * r * r; };
    parts.growth.c0 = 0.0;
    parts.growth.c = 1.0;
    return TonelliLagrangian(std::move(parts));
}

Hamiltonian anisotropic_hamiltonian(const Vec& base, double eps) {
    HamiltonianParts parts;
    parts.dim = static_cast<int>(base.size());
    parts.provenance = HamiltonianProvenance::kClosedForm;
    auto metric = [base, eps](const Vec& x) -> Vec {
        return (base.array() + eps * x.array().sin().square()).matrix();
    };
    parts.eval = [metric](double, const Vec& x, const Vec& p) {
        return 0.5 * (p.array().square() / metric(x).array()).sum();
    };
    parts.grad_p = [metric](double, const Vec& x, const Vec& p) -> Vec {
        return (p.array() / metric(x).array()).matrix();
    };
    return Hamiltonian(std::move(parts));
}

namespace {

// sinh(r)/r and (cosh r - sinh(r)/r)/r^2 with series near 0.
std::pair<double, double> cosh_coefficients(double r) {
    if (r < 1e-4) {
        const double r2 = r * r;
        return {1.0 + r2 / 6.0 + r2 * r2 / 120.0, 1.0 / 3.0 + r2 / 30.0};
    }
    const double a = std::sinh(r) / r;
    return {a, (std::cosh(r) - a) / (r * r)};
}

}  // namespace

TonelliLagrangian cosh_lagrangian(int dim) {
    const int n = dim;
    LagrangianParts parts;
    parts.dim = n;
    parts.name = "cosh";
    parts.eval = [](double, const Vec&, const Vec& v) { return std::cosh(v.norm()) - 1.0; };
    parts.grad_t = [](double, const Vec&, const Vec&) { return 0.0; };
    parts.grad_x = [n](double, const Vec&, const Vec&) -> Vec { return Vec::Zero(n); };
    parts.grad_v = [](double, const Vec&, const Vec& v) -> Vec { return cosh_coefficients(v.norm()).first * v; };
    parts.hess_vv = [n](double, const Vec&, const Vec& v) -> Mat {
        const auto [a, b] = cosh_coefficients(v.norm());
        return a * Mat::Identity(n, n) + b * v * v.transpose();
    };
    parts.hess_vx = [n](double, const Vec&, const Vec&) { return zero_mat(n); };
    parts.grad_vt = [n](double, const Vec&, const Vec&) -> Vec { return Vec::Zero(n); };
    parts.growth.theta = [](double r) { return 0.5 * r * r; };
    parts.growth.theta_bar = [](double r) { return std::cosh(r) - 1.0; };
    parts.growth.c0 = 0.0;
    parts.growth.c = 1.0;
    return TonelliLagrangian(std::move(parts));
}

Hamiltonian cosh_hamiltonian(int dim) {
    HamiltonianParts parts;
    parts.dim = dim;
    parts.provenance = HamiltonianProvenance::kClosedForm;
    parts.eval = [](double, const Vec&, const Vec& p) {
        const double r = p.norm();
        return r * std::asinh(r) - std::sqrt(1.0 + r * r) + 1.0;
    };
    parts.grad_p = [](double, const Vec&, const Vec& p) -> Vec {
        const double r = p.norm();
        return r < 1e-12 ? Vec(p) : Vec(std::asinh(r) / r * p);
    };
    return Hamiltonian(std::move(parts));
}

namespace {

void reject_unknown(const nlohmann::json& params, const std::set<std::string>& allowed, const std::string& key) {
    if (params.is_null()) return;
    if (!params.is_object()) throw Error(ErrorKind::kConfigError, "lagrangian params must be an object");
    for (const auto& [k, _] : params.items()) {
        if (!allowed.count(k)) throw Error(ErrorKind::kConfigError, "unknown parameter '" + k + "' for '" + key + "'");
    }
}

template <typename T>
T get_or(const nlohmann::json& params, const char* name, T fallback) {
    if (params.is_null() || !params.contains(name)) return fallback;
    try {
        return params.at(name).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kConfigError, std::string("bad parameter '") + name + "': " + e.what());
    }
}

Vec get_vec(const nlohmann::json& params, const char* name, int dim, double fill) {
    const auto values = get_or<std::vector<double>>(params, name, std::vector<double>(dim, fill));
    if (static_cast<int>(values.size()) != dim) {
        throw Error(ErrorKind::kConfigError, std::string("parameter '") + name + "' must have dim entries");
    }
    return Eigen::Map<const Eigen::VectorXd>(values.data(), dim);
}

Potential parse_potential(const std::string& name) {
    if (name == "none") return Potential::kNone;
    if (name == "cos") return Potential::kCos;
    if (name == "double_well") return Potential::kDoubleWell;
    throw Error(ErrorKind::kConfigError, "unknown potential '" + name + "'");
}

}  // namespace

Entry from_config(const std::string& key, const nlohmann::json& params) {
    const int dim = get_or<int>(params, "dim", 1);
    if (dim < 1 || dim > kMaxDim) throw Error(ErrorKind::kConfigError, "dim must be in [1, 3]");
    if (key == "free" || key == "mechanical") {
        if (key == "free") {
            reject_unknown(params, {"dim", "drift", "shift"}, key);
        } else {
            reject_unknown(params, {"dim", "potential", "amplitude", "shift", "drift", "tilt"}, key);
        }
        MechanicalParams mp;
        mp.dim = dim;
        mp.potential = parse_potential(get_or<std::string>(params, "potential", "none"));
        mp.amplitude = get_or<double>(params, "amplitude", 1.0);
        mp.shift = get_or<double>(params, "shift", 0.0);
        mp.drift = get_vec(params, "drift", dim, 0.0);
        mp.tilt = get_or<double>(params, "tilt", 0.0);
        return {mechanical(mp), mechanical_hamiltonian(mp), mp};
    }
    if (key == "anisotropic") {
        reject_unknown(params, {"dim", "base", "eps"}, key);
        const Vec base = get_vec(params, "base", dim, 1.0);
        const double eps = get_or<double>(params, "eps", 0.5);
        try {
            return {anisotropic_quadratic(base, eps), anisotropic_hamiltonian(base, eps), std::nullopt};
        } catch (const Error& e) {
            throw Error(ErrorKind::kConfigError, e.what());
        }
    }
    if (key == "cosh") {
        reject_unknown(params, {"dim"}, key);
        return {cosh_lagrangian(dim), cosh_hamiltonian(dim), std::nullopt};
    }
    throw Error(ErrorKind::kConfigError, "unknown lagrangian key '" + key + "'");
}

}  // namespace hjreg::catalog
