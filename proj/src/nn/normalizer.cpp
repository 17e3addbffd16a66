#include "pdl/nn/normalizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pdl::nn {

namespace {

bool is_zero_lambda(double lambda) { return std::abs(lambda) < 1e-12; }

}  // namespace

double box_cox(double y, double lambda, double shift) {
  const double s = y + shift;
  if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "Box-Cox input must exceed -shift");
  const double l = std::log(s);
  return is_zero_lambda(lambda) ? l : std::expm1(lambda * l) / lambda;
}

double box_cox_inverse(double t, double lambda, double shift) {
  if (is_zero_lambda(lambda)) return std::exp(t) - shift;
  const double base = std::max(1.0 + lambda * t, 1e-12);
  return std::exp(std::log(base) / lambda) - shift;
}

double box_cox_log_likelihood(std::span<const double> y, double lambda, double shift) {
  const double n = static_cast<double>(y.size());
  double mean = 0.0, logsum = 0.0;
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    t[i] = box_cox(y[i], lambda, shift);
    mean += t[i];
    logsum += std::log(y[i] + shift);
  }
  mean /= n;
  double var = 0.0;
  for (double v : t) var += (v - mean) * (v - mean);
  var /= n;
  if (!(var > 0.0)) return -std::numeric_limits<double>::infinity();
  return -0.5 * n * std::log(var) + (lambda - 1.0) * logsum;
}

double fit_box_cox_lambda(std::span<const double> y, double shift) {
  if (y.size() < 2) throw Error(ErrorCode::InvalidArgument, "Box-Cox fit needs at least two values");
  double best = 1.0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 400; ++k) {
    const double lambda = (k - 200) / 100.0;
    const double ll = box_cox_log_likelihood(y, lambda, shift);
    if (ll > best_ll) {
      best_ll = ll;
      best = lambda;
    }
  }
  return best;
}

double TargetTransform::apply(double y) const { return (box_cox(y, lambda, shift) - lo) / (hi - lo); }

// outside the fitted range the inverse can run off to infinity for lambda < 0
double TargetTransform::invert(double z) const {
  return box_cox_inverse(lo + std::clamp(z, 0.0, 1.0) * (hi - lo), lambda, shift);
}

TargetTransform fit_target_transform(std::span<const double> y, double shift) {
  TargetTransform t;
  t.shift = shift;
  t.lambda = fit_box_cox_lambda(y, shift);
  t.lo = std::numeric_limits<double>::infinity();
  t.hi = -std::numeric_limits<double>::infinity();
  for (double v : y) {
    const double b = box_cox(v, t.lambda, shift);
    t.lo = std::min(t.lo, b);
    t.hi = std::max(t.hi, b);
  }
  if (!(t.hi > t.lo)) throw Error(ErrorCode::InvalidArgument, "target range is degenerate");
  return t;
}

Eigen::MatrixX2d NormalizerState::apply(const Eigen::MatrixX2d& y) const {
  Eigen::MatrixX2d z(y.rows(), 2);
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (int j = 0; j < 2; ++j) z(i, j) = targets[j].apply(y(i, j));
  return z;
}

Eigen::MatrixX2d NormalizerState::invert(const Eigen::MatrixX2d& z) const {
  Eigen::MatrixX2d y(z.rows(), 2);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (int j = 0; j < 2; ++j) y(i, j) = targets[j].invert(z(i, j));
  return y;
}

NormalizerState fit_normalizer(const Eigen::MatrixX2d& y, double shift) {
  NormalizerState s;
  for (int j = 0; j < 2; ++j) {
    const Eigen::VectorXd col = y.col(j);
    s.targets[j] = fit_target_transform(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), shift);
  }
  return s;
}

}  // namespace pdl::nn
