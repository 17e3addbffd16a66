#pragma once

#include "pdl/flow.hpp"
#include "pdl/transport.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

namespace pdl {

template <class Scalar>
using Vec2T = Eigen::Matrix<Scalar, 2, 1>;
template <class Scalar>
using Mat2T = Eigen::Matrix<Scalar, 2, 2>;
using DispersionTensor = Eigen::Matrix2d;

// ---------------------------------------------------------------------------
// Averaging

/// Moving W x H window mean of an extended (3W x H) field, superficial (solid
/// cells count with their stored value). Returns columns x in [W - halo, 2W + halo).
/// The window wraps in y, so every row of the result is identical.
template <class Derived>
GridT<typename Derived::Scalar> convolutional_average(const Eigen::ArrayBase<Derived>& extended, int base_width, int halo = 0) {
  using Scalar = typename Derived::Scalar;
  const int w = base_width;
  const int h = static_cast<int>(extended.rows());
  if (w < 1 || extended.cols() != 3 * w || h < 1)
    throw Error(ErrorCode::InvalidArgument, "convolutional average needs a 3W x H field");
  if (halo < 0 || halo > w / 2) throw Error(ErrorCode::InvalidArgument, "halo exceeds the extended domain");
  const Eigen::Array<Scalar, 1, Eigen::Dynamic> colsum = extended.colwise().sum();
  const int lo = w / 2;
  const Scalar denom = static_cast<Scalar>(w) * static_cast<Scalar>(h);
  GridT<Scalar> out(h, w + 2 * halo);
  for (int j = 0; j < w + 2 * halo; ++j) {
    const int x = w - halo + j;
    Scalar s(0);
    for (int k = x - lo; k < x - lo + w; ++k) s += colsum(k);
    out.col(j).setConstant(s / denom);
  }
  return out;
}

template <class Derived>
typename Derived::Scalar unit_average(const Eigen::ArrayBase<Derived>& field) {
  if (field.size() == 0) throw Error(ErrorCode::InvalidArgument, "unit average of an empty field");
  return field.mean();
}

/// -(mean central-difference gradient) over the interior of a field carrying a
/// one-column halo on each side; y differences wrap.
template <class Derived>
Vec2T<typename Derived::Scalar> averaged_gradient(const Eigen::ArrayBase<Derived>& with_halo,
                                                  typename Derived::Scalar pixel_size) {
  using Scalar = typename Derived::Scalar;
  const int h = static_cast<int>(with_halo.rows());
  const int w = static_cast<int>(with_halo.cols()) - 2;
  if (w < 1 || h < 1) throw Error(ErrorCode::InvalidArgument, "gradient field needs a one-column halo");
  Scalar gx(0), gy(0);
  for (int y = 0; y < h; ++y)
    for (int x = 1; x <= w; ++x) {
      gx += (with_halo(y, x + 1) - with_halo(y, x - 1)) / (2 * pixel_size);
      gy += (with_halo(wrap(y + 1, h), x) - with_halo(wrap(y - 1, h), x)) / (2 * pixel_size);
    }
  const Scalar n = static_cast<Scalar>(w) * static_cast<Scalar>(h);
  return {-gx / n, -gy / n};
}

/// Unit average of (v - v_bar)(c - <c>) with v = (vx, vy) on one W x H block.
template <class C, class A, class VX, class VY>
Vec2T<typename C::Scalar> perturbation_product(const Eigen::ArrayBase<C>& c, const Eigen::ArrayBase<A>& c_avg,
                                               const Eigen::ArrayBase<VX>& vx, const Eigen::ArrayBase<VY>& vy,
                                               const Vec2T<typename C::Scalar>& v_bar) {
  if (c.rows() != c_avg.rows() || c.cols() != c_avg.cols() || c.rows() != vx.rows() || c.cols() != vx.cols() ||
      vx.rows() != vy.rows() || vx.cols() != vy.cols())
    throw Error(ErrorCode::InvalidArgument, "perturbation product fields differ in shape");
  if (c.size() == 0) throw Error(ErrorCode::InvalidArgument, "perturbation product of an empty block");
  const auto ct = c - c_avg;
  return {((vx - v_bar.x()) * ct).mean(), ((vy - v_bar.y()) * ct).mean()};
}

Vec2 average_velocity(const FlowField& field, const PoreImage& image);

// ---------------------------------------------------------------------------
// Closure

template <class Scalar>
struct UpscaledSampleT {
  Vec2T<Scalar> v_bar = Vec2T<Scalar>::Zero();
  Vec2T<Scalar> neg_grad_c = Vec2T<Scalar>::Zero();
  Vec2T<Scalar> pert = Vec2T<Scalar>::Zero();
  double time = 0.0;
};
using UpscaledSample = UpscaledSampleT<double>;

template <class Scalar>
struct DispersivityPairT {
  Scalar alpha_L = 0;
  Scalar alpha_T = 0;
  bool clamped_L = false;       // raw alpha_L was negative
  bool clamped_T = false;       // alpha_T pulled into [0, alpha_L]
  bool degenerate_T = false;    // transversal gradient vanished
};
using DispersivityPair = DispersivityPairT<double>;

inline constexpr double kLongitudinalDegeneracy = 1e-14;
inline constexpr double kTransversalDegeneracy = 1e-8;

template <class Scalar>
DispersivityPairT<Scalar> fit_alphas(const UpscaledSampleT<Scalar>& s) {
  using std::abs;
  const Scalar speed = s.v_bar.norm();
  if (!(speed > 0)) throw Error(ErrorCode::Stagnation, "averaged velocity is zero");
  const Vec2T<Scalar> dir = s.v_bar / speed;
  const Vec2T<Scalar> perp(-dir.y(), dir.x());
  const Scalar gnorm = s.neg_grad_c.norm();
  const Scalar gl = s.neg_grad_c.dot(dir);
  if (!(abs(gl) >= Scalar(kLongitudinalDegeneracy) * gnorm) || gnorm == 0)
    throw Error(ErrorCode::DegenerateGradient, "concentration gradient has no longitudinal component");

  DispersivityPairT<Scalar> out;
  out.alpha_L = s.pert.dot(dir) / (speed * gl);
  if (out.alpha_L < 0) {
    out.alpha_L = 0;
    out.clamped_L = true;
  }
  const Scalar gt = s.neg_grad_c.dot(perp);
  if (abs(gt) < Scalar(kTransversalDegeneracy) * gnorm) {
    out.degenerate_T = true;
    out.alpha_T = 0;
    return out;
  }
  out.alpha_T = s.pert.dot(perp) / (speed * gt);
  if (out.alpha_T < 0) {
    out.alpha_T = 0;
    out.clamped_T = true;
  }
  if (out.alpha_T > out.alpha_L) {
    out.alpha_T = out.alpha_L;
    out.clamped_T = true;
  }
  return out;
}

template <class Scalar>
DispersivityPairT<Scalar> aggregate_alphas(std::span<const DispersivityPairT<Scalar>> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "no dispersivity samples to aggregate");
  DispersivityPairT<Scalar> out;
  for (const auto& p : pairs) {
    out.alpha_L += p.alpha_L;
    out.alpha_T += p.alpha_T;
  }
  out.alpha_L /= static_cast<Scalar>(pairs.size());
  out.alpha_T /= static_cast<Scalar>(pairs.size());
  if (out.alpha_L < 0) {
    out.alpha_L = 0;
    out.clamped_L = true;
  }
  if (out.alpha_T < 0) {
    out.alpha_T = 0;
    out.clamped_T = true;
  }
  if (out.alpha_T > out.alpha_L) {
    out.alpha_T = out.alpha_L;
    out.clamped_T = true;
  }
  return out;
}

template <class Scalar>
Mat2T<Scalar> build_tensor(const Vec2T<Scalar>& v_bar, const DispersivityPairT<Scalar>& a) {
  const Scalar speed = v_bar.norm();
  if (speed == 0) return Mat2T<Scalar>::Zero();
  return (a.alpha_L - a.alpha_T) * (v_bar * v_bar.transpose()) / speed + a.alpha_T * speed * Mat2T<Scalar>::Identity();
}

struct ClampStats {
  double longitudinal = 0.0;  // fraction of samples with alpha_L clamped
  double transversal = 0.0;   // fraction with alpha_T clamped
  double degenerate = 0.0;    // fraction with a vanishing transversal gradient
};

ClampStats clamp_statistics(std::span<const DispersivityPair> pairs);

// ---------------------------------------------------------------------------
// Whole-run closure

UpscaledSample upscale_snapshot(const ConcentrationSnapshot& snap, const CenterVelocity& velocity, const Vec2& v_bar,
                                int base_width, double pixel_size);

struct UpscalingResult {
  Vec2 v_bar = Vec2::Zero();
  std::vector<UpscaledSample> samples;
  std::vector<DispersivityPair> pairs;
  DispersivityPair alphas;
  ClampStats clamps;
};

UpscalingResult upscale_run(const PoreImage& image, const FlowField& field, std::span<const ConcentrationSnapshot> snaps);

}  // namespace pdl
