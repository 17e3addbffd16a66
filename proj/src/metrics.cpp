#include "pdl/metrics.hpp"

#include <cmath>

namespace pdl {

const std::array<std::string_view, kMetricCount>& metric_names() {
  static const std::array<std::string_view, kMetricCount> names{
      "tau_x", "tau_y", "F_x", "F_y", "N_pore", "theta_pore", "sigma_pore", "phi", "R_dim", "S",
      "Gamma_E", "Gamma_NE", "Gamma_N", "Gamma_NW", "Gamma_W", "Gamma_SW", "Gamma_S", "Gamma_SE",
      "sigma_d", "gamma_d", "kappa_d"};
  return names;
}

std::array<double, kMetricCount> MetricsVector::values() const {
  std::array<double, kMetricCount> v{tau_x, tau_y, flow_x, flow_y, pore_count, pore_mean, pore_std, phi, roughness, surface};
  for (int k = 0; k < 8; ++k) v[10 + k] = gamma[k];
  v[18] = sigma_d;
  v[19] = gamma_d;
  v[20] = kappa_d;
  return v;
}

MetricsVector MetricsVector::from_values(std::span<const double> v) {
  if (v.size() != kMetricCount) throw Error(ErrorCode::InvalidArgument, "metrics vector needs 21 entries");
  MetricsVector m;
  m.tau_x = v[0];
  m.tau_y = v[1];
  m.flow_x = v[2];
  m.flow_y = v[3];
  m.pore_count = v[4];
  m.pore_mean = v[5];
  m.pore_std = v[6];
  m.phi = v[7];
  m.roughness = v[8];
  m.surface = v[9];
  for (int k = 0; k < 8; ++k) m.gamma[k] = v[10 + k];
  m.sigma_d = v[18];
  m.gamma_d = v[19];
  m.kappa_d = v[20];
  m.blocked_x = m.tau_x >= kBlockedTortuosity;
  m.blocked_y = m.tau_y >= kBlockedTortuosity;
  return m;
}

MetricsVector assemble_metrics(const PoreImage& image) {
  MetricsVector m;
  try {
    m.tau_x = tortuosity(image, Axis::X);
  } catch (const Error&) {
    m.tau_x = kBlockedTortuosity;
    m.blocked_x = true;
  }
  try {
    m.tau_y = tortuosity(image, Axis::Y);
  } catch (const Error&) {
    m.tau_y = kBlockedTortuosity;
    m.blocked_y = true;
  }
  m.flow_x = static_cast<double>(max_flow(image, Axis::X));
  m.flow_y = static_cast<double>(max_flow(image, Axis::Y));

  const Segmentation seg = segment_pores(image);
  m.pore_count = seg.count();
  m.pore_mean = seg.mean_size();
  m.pore_std = seg.std_size();
  m.phi = porosity(image);

  const Roughness r = roughness_dimension(image);
  m.roughness = r.dimension;
  m.roughness_undefined = !r.defined;
  m.surface = surface_area(image);

  const Directionality d = directionality(image);
  m.gamma = d.gamma;
  m.sigma_d = d.sigma;
  m.gamma_d = d.skewness;
  m.kappa_d = d.kurtosis;
  m.directionality_undefined = !d.defined;
  return m;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::InvalidArgument, "pearson needs two equal series of length >= 2");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::UndefinedCorrelation, "zero variance in correlation input");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace pdl
