#include "pdl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace pdl {
namespace {

constexpr int kBisectionSteps = 20;
constexpr double kPorosityTolerance = 0.02;

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// Gradient noise whose lattice lives on a torus of `period` cells.
class TorusPerlin {
 public:
  TorusPerlin(int period, std::mt19937_64& rng) : period_(period), gradients_(period * period) {
    for (auto& g : gradients_) {
      const double angle = 2.0 * std::numbers::pi * unit_double(rng());
      g = Vec2(std::cos(angle), std::sin(angle));
    }
  }

  // (u, v) in lattice units, expected in [0, period).
  double operator()(double u, double v) const {
    const int i0 = static_cast<int>(std::floor(u));
    const int j0 = static_cast<int>(std::floor(v));
    const double fu = u - i0;
    const double fv = v - j0;
    const double n00 = corner(i0, j0, fu, fv);
    const double n10 = corner(i0 + 1, j0, fu - 1.0, fv);
    const double n01 = corner(i0, j0 + 1, fu, fv - 1.0);
    const double n11 = corner(i0 + 1, j0 + 1, fu - 1.0, fv - 1.0);
    const double su = fade(fu);
    const double sv = fade(fv);
    const double bottom = n00 + su * (n10 - n00);
    const double top = n01 + su * (n11 - n01);
    return bottom + sv * (top - bottom);
  }

 private:
  double corner(int i, int j, double du, double dv) const {
    const Vec2& g = gradients_[wrap(j, period_) * period_ + wrap(i, period_)];
    return g.x() * du + g.y() * dv;
  }

  int period_;
  std::vector<Vec2> gradients_;
};

double void_fraction_below(const Grid& field, double threshold) {
  return static_cast<double>((field < threshold).count()) / static_cast<double>(field.size());
}

// Voronoi-edge distance: distance from each pixel centre to the nearest bisector
// of its owning seed, with seeds replicated into the 8 neighbouring tiles.
Grid voronoi_edge_distance(const GeneratorSpec& spec, int resolution, std::mt19937_64& rng) {
  const int n = std::max(2, spec.scale);
  std::vector<Vec2> seeds;
  seeds.reserve(9 * n);
  std::vector<Vec2> base(n);
  for (auto& p : base) {
    const double x = unit_double(rng());
    p = Vec2(x, unit_double(rng()));
  }
  for (int ty = -1; ty <= 1; ++ty)
    for (int tx = -1; tx <= 1; ++tx)
      for (const auto& p : base) seeds.emplace_back(p.x() + tx, p.y() + ty);

  Grid dist(resolution, resolution);
  const double h = 1.0 / resolution;
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const Vec2 q((x + 0.5) * h, (y + 0.5) * h);
      std::size_t owner = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        const double d = (seeds[k] - q).squaredNorm();
        if (d < best) {
          best = d;
          owner = k;
        }
      }
      double edge = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        if (k == owner) continue;
        const double sep = (seeds[k] - seeds[owner]).norm();
        if (sep == 0.0) continue;
        edge = std::min(edge, ((seeds[k] - q).squaredNorm() - best) / (2.0 * sep));
      }
      dist(y, x) = edge;
    }
  }
  return dist;
}

double pick_threshold(const Grid& field, double lo, double hi, double target) {
  double best_t = hi;
  double best_err = std::numeric_limits<double>::infinity();
  for (int step = 0; step < kBisectionSteps; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double phi = void_fraction_below(field, mid);
    const double err = std::abs(phi - target);
    if (err < best_err) {
      best_err = err;
      best_t = mid;
    }
    if (phi < target) lo = mid;
    else hi = mid;
  }
  if (best_err > kPorosityTolerance)
    throw Error(ErrorCode::Generation, "target porosity " + std::to_string(target) + " unreachable (closest error " +
                                           std::to_string(best_err) + ")");
  return best_t;
}

}  // namespace

Grid periodic_noise_field(const GeneratorSpec& spec, int resolution) {
  std::mt19937_64 rng(spec.seed);
  const int octaves = spec.kind == GeneratorKind::Fractal ? std::max(1, spec.octaves) : 1;
  const int period = std::max(1, spec.scale);
  Grid field = Grid::Zero(resolution, resolution);
  double amplitude = 1.0;
  for (int k = 0; k < octaves; ++k) {
    const int p = period << k;
    const TorusPerlin noise(p, rng);
    const double step = static_cast<double>(p) / resolution;
    for (int y = 0; y < resolution; ++y)
      for (int x = 0; x < resolution; ++x) field(y, x) += amplitude * noise((x + 0.5) * step, (y + 0.5) * step);
    amplitude *= 0.5;
  }
  return field;
}

Generation generate_with_report(const GeneratorSpec& spec, int resolution) {
  if (resolution < 2) throw Error(ErrorCode::InvalidArgument, "resolution must be at least 2");
  if (!(spec.porosity > 0.0 && spec.porosity < 1.0))
    throw Error(ErrorCode::InvalidArgument, "target porosity must lie in (0, 1)");

  Grid field;
  double lo = 0.0;
  double hi = 0.0;
  if (spec.kind == GeneratorKind::Voronoi) {
    std::mt19937_64 rng(spec.seed);
    field = voronoi_edge_distance(spec, resolution, rng);
    lo = 0.0;
    hi = field.maxCoeff() + 1e-12;
  } else {
    field = periodic_noise_field(spec, resolution);
    lo = field.minCoeff();
    hi = field.maxCoeff() + 1e-12;
  }
  const double threshold = pick_threshold(field, lo, hi, spec.porosity);

  Generation out;
  out.threshold = threshold;
  out.raw = PoreImage(field < threshold, 1.0 / resolution);
  auto filtered = filter_periodic_connectivity(out.raw);
  out.image = std::move(filtered.image);
  out.removed = filtered.removed;
  return out;
}

PoreImage generate(const GeneratorSpec& spec, int resolution) { return generate_with_report(spec, resolution).image; }

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::Perlin: return "perlin";
    case GeneratorKind::Fractal: return "fractal";
    case GeneratorKind::Voronoi: return "voronoi";
  }
  return "unknown";
}

GeneratorKind generator_kind_from_string(std::string_view name) {
  for (const auto kind : {GeneratorKind::Perlin, GeneratorKind::Fractal, GeneratorKind::Voronoi})
    if (to_string(kind) == name) return kind;
  throw Error(ErrorCode::InvalidArgument, "unknown generator kind '" + std::string(name) + "'");
}

}  // namespace pdl
