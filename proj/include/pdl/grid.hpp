#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace pdl {

/// Cell fields are stored row-major with (row, col) = (y, x).
template <typename Scalar>
using GridT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Grid = GridT<double>;
using Mask = GridT<bool>;

using Vec2 = Eigen::Vector2d;

/// Periodic index into [0, n).
constexpr int wrap(int i, int n) noexcept {
  const int r = i % n;
  return r < 0 ? r + n : r;
}

}  // namespace pdl
