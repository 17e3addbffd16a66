#include "pdl/upscaling.hpp"

namespace pdl {

Vec2 average_velocity(const FlowField& field, const PoreImage& image) {
  const CenterVelocity c = interpolate_to_centers(field, image);
  return {unit_average(c.x), unit_average(c.y)};
}

ClampStats clamp_statistics(std::span<const DispersivityPair> pairs) {
  ClampStats s;
  if (pairs.empty()) return s;
  for (const auto& p : pairs) {
    s.longitudinal += p.clamped_L;
    s.transversal += p.clamped_T;
    s.degenerate += p.degenerate_T;
  }
  const double n = static_cast<double>(pairs.size());
  s.longitudinal /= n;
  s.transversal /= n;
  s.degenerate /= n;
  return s;
}

UpscaledSample upscale_snapshot(const ConcentrationSnapshot& snap, const CenterVelocity& velocity, const Vec2& v_bar,
                                int base_width, double pixel_size) {
  const int w = base_width;
  const Grid avg = convolutional_average(snap.c, w, 1);
  UpscaledSample s;
  s.time = snap.time;
  s.v_bar = v_bar;
  s.neg_grad_c = averaged_gradient(avg, pixel_size);
  const Grid block = snap.c.middleCols(w, w);
  s.pert = perturbation_product(block, avg.middleCols(1, w), velocity.x, velocity.y, v_bar);
  return s;
}

UpscalingResult upscale_run(const PoreImage& image, const FlowField& field, std::span<const ConcentrationSnapshot> snaps) {
  if (snaps.empty()) throw Error(ErrorCode::InvalidArgument, "no concentration snapshots");
  UpscalingResult r;
  const CenterVelocity vel = interpolate_to_centers(field, image);
  r.v_bar = {unit_average(vel.x), unit_average(vel.y)};
  for (const auto& snap : snaps) {
    r.samples.push_back(upscale_snapshot(snap, vel, r.v_bar, image.width(), image.pixel_size()));
    r.pairs.push_back(fit_alphas(r.samples.back()));
  }
  r.alphas = aggregate_alphas<double>(r.pairs);
  r.clamps = clamp_statistics(r.pairs);
  return r;
}

}  // namespace pdl
