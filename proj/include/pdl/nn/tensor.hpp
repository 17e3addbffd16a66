#pragma once

#include "pdl/errors.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace pdl::nn {

/// Dense row-major tensor; the first dimension is the batch.
template <class Scalar>
struct TensorT {
  std::vector<int> shape;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> values;

  TensorT() = default;
  explicit TensorT(std::vector<int> dims) : shape(std::move(dims)) { values.setZero(count(shape)); }

  static Eigen::Index count(const std::vector<int>& dims) {
    return std::accumulate(dims.begin(), dims.end(), Eigen::Index{1}, [](Eigen::Index a, int b) { return a * b; });
  }
  int dim(std::size_t i) const { return shape.at(i); }
  int batch() const { return shape.empty() ? 0 : shape[0]; }
  Eigen::Index size() const { return values.size(); }
  /// Elements per batch entry.
  Eigen::Index stride() const { return batch() ? size() / batch() : 0; }

  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  /// batch x stride view.
  Eigen::Map<RowMatrix> rows() { return {values.data(), batch(), stride()}; }
  Eigen::Map<const RowMatrix> rows() const { return {values.data(), batch(), stride()}; }

  Scalar& at(int n, int c, int y, int x) { return values[((static_cast<Eigen::Index>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x]; }
  Scalar at(int n, int c, int y, int x) const { return values[((static_cast<Eigen::Index>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x]; }

  TensorT reshaped(std::vector<int> dims) const {
    if (count(dims) != size()) throw Error(ErrorCode::InvalidArgument, "reshape changes element count");
    TensorT out;
    out.shape = std::move(dims);
    out.values = values;
    return out;
  }
  /// Batch entries [first, first + n).
  TensorT slice(int first, int n) const {
    std::vector<int> dims = shape;
    dims[0] = n;
    TensorT out;
    out.shape = dims;
    out.values = values.segment(static_cast<Eigen::Index>(first) * stride(), static_cast<Eigen::Index>(n) * stride());
    return out;
  }
};

using Tensor = TensorT<double>;

inline constexpr int wrap_index(int i, int n) { return ((i % n) + n) % n; }

/// Periodic cross-correlation: the input is wrapped by k/2 on every side, then
/// a valid correlation with each [cin, k, k] kernel is taken.
/// input [N, Cin, H, W], kernels [Cout, Cin, k, k] -> [N, Cout, H + 2(k/2) - k + 1, ...]
template <class Scalar>
TensorT<Scalar> periodic_conv2d(const TensorT<Scalar>& input, const TensorT<Scalar>& kernels) {
  if (input.shape.size() != 4 || kernels.shape.size() != 4 || input.dim(1) != kernels.dim(1) ||
      kernels.dim(2) != kernels.dim(3))
    throw Error(ErrorCode::InvalidArgument, "periodic_conv2d shape mismatch");
  const int n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const int cout = kernels.dim(0), k = kernels.dim(2), pad = k / 2;
  if (h < k || w < k) throw Error(ErrorCode::InvalidArgument, "periodic_conv2d input smaller than kernel");
  const int ho = h + 2 * pad - k + 1, wo = w + 2 * pad - k + 1;
  TensorT<Scalar> out({n, cout, ho, wo});
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < cout; ++o)
      for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) {
          Scalar s(0);
          for (int c = 0; c < cin; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx)
                s += kernels.at(o, c, ky, kx) * input.at(b, c, wrap_index(y + ky - pad, h), wrap_index(x + kx - pad, w));
          out.at(b, o, y, x) = s;
        }
  return out;
}

/// Deterministic draws independent of the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t r;
    do r = next();
    while (r >= limit);
    return r % n;
  }
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::uint64_t state_;
};

}  // namespace pdl::nn
