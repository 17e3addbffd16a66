#pragma once

#include "pdl/errors.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>

namespace pdl::nn {

/// Box-Cox with shift, followed by a linear map of the fitted range to [0, 1].
struct TargetTransform {
  double lambda = 1.0;
  double shift = 1e-3;
  double lo = 0.0;
  double hi = 1.0;

  double apply(double y) const;
  double invert(double z) const;
};

double box_cox(double y, double lambda, double shift);
double box_cox_inverse(double t, double lambda, double shift);
/// Profile log-likelihood of the Box-Cox model at lambda.
double box_cox_log_likelihood(std::span<const double> y, double lambda, double shift);
/// Maximum-likelihood lambda over [-2, 2] in steps of 0.01.
double fit_box_cox_lambda(std::span<const double> y, double shift);
TargetTransform fit_target_transform(std::span<const double> y, double shift = 1e-3);

struct NormalizerState {
  std::array<TargetTransform, 2> targets;

  Eigen::MatrixX2d apply(const Eigen::MatrixX2d& y) const;
  Eigen::MatrixX2d invert(const Eigen::MatrixX2d& z) const;
};

NormalizerState fit_normalizer(const Eigen::MatrixX2d& y, double shift = 1e-3);

}  // namespace pdl::nn
