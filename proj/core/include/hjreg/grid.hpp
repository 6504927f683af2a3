#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <istream>
#include <ostream>
#include <vector>

#include <nlohmann/json.hpp>

#include "hjreg/types.hpp"

namespace hjreg {

enum class BoundaryPolicy { kConstantExtend, kPeriodic };

/// Uniform box grid. Constant-extend grids have nodes lo .. lo + (count - 1) h
/// and clamp queries to the box; periodic grids have period count * h.
struct GridSpec {
    Vec lo;
    Vec spacing;
    std::array<int, kMaxDim> counts{1, 1, 1};
    BoundaryPolicy boundary = BoundaryPolicy::kConstantExtend;

    /// Grid covering [lo, hi]; for periodic grids hi is the period end and is
    /// not a node.
    static GridSpec box(const Vec& lo, const Vec& hi, const std::array<int, kMaxDim>& counts,
                        BoundaryPolicy boundary = BoundaryPolicy::kConstantExtend);

    [[nodiscard]] int dim() const { return static_cast<int>(lo.size()); }
    [[nodiscard]] std::size_t size() const;
    /// Last node for constant-extend grids, period end for periodic grids.
    [[nodiscard]] Vec hi() const;
    [[nodiscard]] Vec node(std::size_t flat) const;
    [[nodiscard]] std::array<int, kMaxDim> multi_index(std::size_t flat) const;
    [[nodiscard]] std::size_t flat_index(const std::array<int, kMaxDim>& idx) const;
    [[nodiscard]] double min_spacing() const { return spacing.minCoeff(); }
    /// True when x lies in the closed box (always true for periodic grids).
    [[nodiscard]] bool contains(const Vec& x, double margin = 0.0) const;
    /// Aligned sub-grid of the nodes inside [lo, hi] (constant-extend).
    [[nodiscard]] GridSpec sub_box(const Vec& lo, const Vec& hi) const;

    [[nodiscard]] nlohmann::json to_json() const;
    static GridSpec from_json(const nlohmann::json& j);
};

/// Scalar field sampled on a GridSpec with multilinear interpolation.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(GridSpec spec, std::vector<double> values);

    static GridFunction sample(const GridSpec& spec, const std::function<double(const Vec&)>& f);

    [[nodiscard]] const GridSpec& spec() const { return spec_; }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    [[nodiscard]] std::vector<double>& values() { return values_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] int dim() const { return spec_.dim(); }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
    [[nodiscard]] Vec node(std::size_t i) const { return spec_.node(i); }

    /// Multilinear interpolation; clamps or wraps according to the policy.
    [[nodiscard]] double operator()(const Vec& x) const;

    /// Gradient of the multilinear interpolant (one-sided at cell faces).
    [[nodiscard]] Vec gradient(const Vec& x) const;

    /// Largest Euclidean norm of the per-node forward-difference slope vector.
    [[nodiscard]] double lipschitz() const;

    /// Estimated error of the multilinear interpolant at cell midpoints:
    /// the largest |d2 u_i + d2 u_{i+1}| / 16 over axes, where d2 is the
    /// undivided second difference (the cubic-versus-linear midpoint gap).
    [[nodiscard]] double interpolation_error() const;

    /// Value at the node offset by `step` nodes along `axis` (clamped or wrapped).
    [[nodiscard]] double neighbor(std::size_t flat, int axis, int step) const;

    [[nodiscard]] double max_abs_diff(const GridFunction& other) const;

    /// CSV rows x_1..x_n, value (17 significant digits).
    void write_csv(std::ostream& out) const;
    static GridFunction read_csv(const GridSpec& spec, std::istream& in);

private:
    GridSpec spec_;
    std::vector<double> values_;
};

}  // namespace hjreg
