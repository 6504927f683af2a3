#include "hjreg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>

#include "hjreg/error.hpp"

namespace hjreg {

GridSpec GridSpec::box(const Vec& lo, const Vec& hi, const std::array<int, kMaxDim>& counts,
                       BoundaryPolicy boundary) {
    const int n = static_cast<int>(lo.size());
    if (n < 1 || n > kMaxDim || hi.size() != n) throw Error(ErrorKind::kInvalidArgument, "grid dimension");
    GridSpec spec;
    spec.lo = lo;
    spec.spacing = Vec(n);
    spec.boundary = boundary;
    for (int i = 0; i < n; ++i) {
        const int min_count = boundary == BoundaryPolicy::kPeriodic ? 1 : 2;
        if (counts[i] < min_count || !(hi(i) > lo(i))) {
            throw Error(ErrorKind::kInvalidArgument, "grid needs hi > lo and enough nodes");
        }
        spec.counts[i] = counts[i];
        const int cells = boundary == BoundaryPolicy::kPeriodic ? counts[i] : counts[i] - 1;
        spec.spacing(i) = (hi(i) - lo(i)) / cells;
    }
    for (int i = n; i < kMaxDim; ++i) spec.counts[i] = 1;
    return spec;
}

std::size_t GridSpec::size() const {
    std::size_t total = 1;
    for (int i = 0; i < dim(); ++i) total *= static_cast<std::size_t>(counts[i]);
    return total;
}

Vec GridSpec::hi() const {
    Vec out(dim());
    for (int i = 0; i < dim(); ++i) {
        const int cells = boundary == BoundaryPolicy::kPeriodic ? counts[i] : counts[i] - 1;
        out(i) = lo(i) + cells * spacing(i);
    }
    return out;
}

std::array<int, kMaxDim> GridSpec::multi_index(std::size_t flat) const {
    std::array<int, kMaxDim> idx{0, 0, 0};
    for (int i = dim() - 1; i >= 0; --i) {
        idx[i] = static_cast<int>(flat % counts[i]);
        flat /= counts[i];
    }
    return idx;
}

std::size_t GridSpec::flat_index(const std::array<int, kMaxDim>& idx) const {
    std::size_t flat = 0;
    for (int i = 0; i < dim(); ++i) flat = flat * counts[i] + static_cast<std::size_t>(idx[i]);
    return flat;
}

Vec GridSpec::node(std::size_t flat) const {
    const auto idx = multi_index(flat);
    Vec x(dim());
    for (int i = 0; i < dim(); ++i) x(i) = lo(i) + idx[i] * spacing(i);
    return x;
}

bool GridSpec::contains(const Vec& x, double margin) const {
    if (boundary == BoundaryPolicy::kPeriodic) return true;
    const Vec top = hi();
    for (int i = 0; i < dim(); ++i) {
        if (x(i) < lo(i) + margin - 1e-9 * spacing(i) || x(i) > top(i) - margin + 1e-9 * spacing(i)) {
            return false;
        }
    }
    return true;
}

GridSpec GridSpec::sub_box(const Vec& box_lo, const Vec& box_hi) const {
    GridSpec out = *this;
    out.boundary = BoundaryPolicy::kConstantExtend;
    for (int i = 0; i < dim(); ++i) {
        const int first = std::max(0, static_cast<int>(std::ceil((box_lo(i) - lo(i)) / spacing(i) - 1e-9)));
        const int last = std::min(counts[i] - 1, static_cast<int>(std::floor((box_hi(i) - lo(i)) / spacing(i) + 1e-9)));
        if (last < first) throw Error(ErrorKind::kInvalidArgument, "sub-box contains no grid nodes");
        out.lo(i) = lo(i) + first * spacing(i);
        out.counts[i] = last - first + 1;
    }
    return out;
}

nlohmann::json GridSpec::to_json() const {
    nlohmann::json j;
    j["dim"] = dim();
    j["lo"] = std::vector<double>(lo.data(), lo.data() + dim());
    j["spacing"] = std::vector<double>(spacing.data(), spacing.data() + dim());
    j["counts"] = std::vector<int>(counts.begin(), counts.begin() + dim());
    j["boundary"] = boundary == BoundaryPolicy::kPeriodic ? "periodic" : "constant_extend";
    return j;
}

GridSpec GridSpec::from_json(const nlohmann::json& j) {
    GridSpec spec;
    const int n = j.at("dim").get<int>();
    if (n < 1 || n > kMaxDim) throw Error(ErrorKind::kInvalidArgument, "grid dimension");
    const auto lo = j.at("lo").get<std::vector<double>>();
    const auto spacing = j.at("spacing").get<std::vector<double>>();
    const auto counts = j.at("counts").get<std::vector<int>>();
    if (static_cast<int>(lo.size()) != n || static_cast<int>(spacing.size()) != n ||
        static_cast<int>(counts.size()) != n) {
        throw Error(ErrorKind::kInvalidArgument, "grid header arrays must have dim entries");
    }
    spec.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), n);
    spec.spacing = Eigen::Map<const Eigen::VectorXd>(spacing.data(), n);
    for (int i = 0; i < n; ++i) spec.counts[i] = counts[i];
    const std::string policy = j.at("boundary").get<std::string>();
    if (policy == "periodic") {
        spec.boundary = BoundaryPolicy::kPeriodic;
    } else if (policy == "constant_extend") {
        spec.boundary = BoundaryPolicy::kConstantExtend;
    } else {
        throw Error(ErrorKind::kInvalidArgument, "unknown boundary policy '" + policy + "'");
    }
    return spec;
}

GridFunction::GridFunction(GridSpec spec, std::vector<double> values)
    : spec_(std::move(spec)), values_(std::move(values)) {
    if (values_.size() != spec_.size()) throw Error(ErrorKind::kInvalidArgument, "grid value count mismatch");
    for (double v : values_) {
        if (!std::isfinite(v)) throw Error(ErrorKind::kInvalidArgument, "grid values must be finite");
    }
}

GridFunction GridFunction::sample(const GridSpec& spec, const std::function<double(const Vec&)>& f) {
    std::vector<double> values(spec.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = f(spec.node(i));
    return GridFunction(spec, std::move(values));
}

double GridFunction::operator()(const Vec& x) const {
    const int n = dim();
    std::array<int, kMaxDim> base{0, 0, 0};
    std::array<double, kMaxDim> frac{0.0, 0.0, 0.0};
    const bool periodic = spec_.boundary == BoundaryPolicy::kPeriodic;
    for (int i = 0; i < n; ++i) {
        const int count = spec_.counts[i];
        double u = (x(i) - spec_.lo(i)) / spec_.spacing(i);
        if (periodic) {
            u = std::fmod(u, static_cast<double>(count));
            if (u < 0.0) u += count;
            int k = static_cast<int>(std::floor(u));
            if (k >= count) k = count - 1;
            base[i] = k;
            frac[i] = u - k;
        } else {
            u = std::clamp(u, 0.0, static_cast<double>(count - 1));
            int k = std::min(static_cast<int>(std::floor(u)), count - 2);
            k = std::max(k, 0);
            base[i] = k;
            frac[i] = count > 1 ? u - k : 0.0;
        }
    }
    double total = 0.0;
    for (int corner = 0; corner < (1 << n); ++corner) {
        double weight = 1.0;
        std::array<int, kMaxDim> idx{0, 0, 0};
        for (int i = 0; i < n; ++i) {
            const int bit = (corner >> i) & 1;
            weight *= bit ? frac[i] : 1.0 - frac[i];
            int k = base[i] + bit;
            if (periodic) {
                k %= spec_.counts[i];
            } else {
                k = std::min(k, spec_.counts[i] - 1);
            }
            idx[i] = k;
        }
        if (weight != 0.0) total += weight * values_[spec_.flat_index(idx)];
    }
    return total;
}

Vec GridFunction::gradient(const Vec& x) const {
    const int n = dim();
    Vec g(n);
    for (int i = 0; i < n; ++i) {
        const double h = spec_.spacing(i);
        double u = (x(i) - spec_.lo(i)) / h;
        const int count = spec_.counts[i];
        if (spec_.boundary == BoundaryPolicy::kConstantExtend) {
            if (u <= 0.0 || u >= count - 1) {
                g(i) = 0.0;
                continue;
            }
            u = std::min(std::floor(u), static_cast<double>(count - 2));
        } else {
            u = std::floor(u);
        }
        Vec a = x;
        Vec b = x;
        a(i) = spec_.lo(i) + u * h;
        b(i) = a(i) + h;
        g(i) = ((*this)(b) - (*this)(a)) / h;
    }
    return g;
}

double GridFunction::neighbor(std::size_t flat, int axis, int step) const {
    auto idx = spec_.multi_index(flat);
    const int count = spec_.counts[axis];
    int k = idx[axis] + step;
    if (spec_.boundary == BoundaryPolicy::kPeriodic) {
        k = ((k % count) + count) % count;
    } else {
        k = std::clamp(k, 0, count - 1);
    }
    idx[axis] = k;
    return values_[spec_.flat_index(idx)];
}

double GridFunction::lipschitz() const {
    double best = 0.0;
    const bool periodic = spec_.boundary == BoundaryPolicy::kPeriodic;
    for (std::size_t f = 0; f < values_.size(); ++f) {
        const auto idx = spec_.multi_index(f);
        double sq = 0.0;
        for (int i = 0; i < dim(); ++i) {
            if (!periodic && idx[i] + 1 >= spec_.counts[i]) continue;
            const double slope = (neighbor(f, i, 1) - values_[f]) / spec_.spacing(i);
            sq += slope * slope;
        }
        best = std::max(best, std::sqrt(sq));
    }
    return best;
}

double GridFunction::interpolation_error() const {
    double best = 0.0;
    const bool periodic = spec_.boundary == BoundaryPolicy::kPeriodic;
    for (std::size_t f = 0; f < values_.size(); ++f) {
        const auto idx = spec_.multi_index(f);
        for (int i = 0; i < dim(); ++i) {
            if (!periodic && (idx[i] < 1 || idx[i] + 2 >= spec_.counts[i])) continue;
            const double gap = -neighbor(f, i, -1) + values_[f] + neighbor(f, i, 1) - neighbor(f, i, 2);
            best = std::max(best, std::abs(gap) / 16.0);
        }
    }
    return best;
}

double GridFunction::max_abs_diff(const GridFunction& other) const {
    if (other.size() != size()) throw Error(ErrorKind::kInvalidArgument, "grid size mismatch");
    double best = 0.0;
    for (std::size_t i = 0; i < size(); ++i) best = std::max(best, std::abs(values_[i] - other.values_[i]));
    return best;
}

void GridFunction::write_csv(std::ostream& out) const {
    for (int i = 1; i <= dim(); ++i) out << 'x' << i << ',';
    out << "value\n" << std::setprecision(17);
    for (std::size_t f = 0; f < size(); ++f) {
        const Vec x = node(f);
        for (int i = 0; i < dim(); ++i) out << x(i) << ',';
        out << values_[f] << '\n';
    }
}

GridFunction GridFunction::read_csv(const GridSpec& spec, std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::kInvalidArgument, "empty grid CSV");
    std::vector<double> values;
    values.reserve(spec.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        values.push_back(std::stod(line.substr(comma == std::string::npos ? 0 : comma + 1)));
    }
    return GridFunction(spec, std::move(values));
}

}  // namespace hjreg
