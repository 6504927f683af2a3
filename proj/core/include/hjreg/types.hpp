#pragma once

#include <Eigen/Dense>

namespace hjreg {

/// Spatial dimension cap. Desk-scale experiments run in n <= 3, which lets
/// every vector and matrix live on the stack.
inline constexpr int kMaxDim = 3;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                          kMaxDim, kMaxDim>;

inline Vec zeros(int dim) { return Vec::Zero(dim); }

inline Vec vec1(double a) {
    Vec v(1);
    v(0) = a;
    return v;
}

inline Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace hjreg
