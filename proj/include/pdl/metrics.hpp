#pragma once

#include "pdl/geometry.hpp"

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace pdl {

enum class Axis { X, Y };

// ---------------------------------------------------------------------------
// Interface metrics

/// Interface length per unit area from the per-pixel face rules.
double surface_area(const PoreImage& image);

struct Roughness {
  double dimension = 0.0;
  bool defined = false;
  std::vector<int> box_sizes;   // fitted levels, largest first
  std::vector<long> counts;     // mixed boxes per level
};

/// Box-counting slope over power-of-two box sizes anchored at the origin.
Roughness roughness_dimension(const PoreImage& image);
/// Boxes of side `box` (clipped at the image edge) holding both void and solid.
long mixed_box_count(const PoreImage& image, int box);

struct Directionality {
  std::array<double, 8> gamma{};  // bin k covers the normal direction k * 45 deg
  double sigma = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;          // raw fourth standardized moment
  bool defined = false;
};

Directionality directionality(const PoreImage& image);
/// Population std, skewness and raw kurtosis of the bin values.
void directionality_statistics(Directionality& d);

// ---------------------------------------------------------------------------
// Volume metrics

/// Largest periodically connected void component over all pixels.
double porosity(const PoreImage& image);

/// Squared Euclidean distance from each void pixel to the nearest solid pixel on
/// the torus; -1 everywhere when there is no solid.
GridT<long> periodic_distance_squared(const PoreImage& image);

struct Segmentation {
  GridT<int> labels;             // -1 on solid
  std::vector<long> sizes;
  int count() const { return static_cast<int>(sizes.size()); }
  double mean_size() const;
  double std_size() const;
};

Segmentation segment_pores(const PoreImage& image, int peak_radius = 3);

// ---------------------------------------------------------------------------
// Connectivity metrics

/// Stair-wise path cost: `single` unit steps plus `pairs` diagonal steps of sqrt(2).
struct PathCost {
  int single = 0;
  int pairs = 0;
  double length() const;
  auto operator<=>(const PathCost&) const = default;
};

/// Path cost of a move sequence (0 = x, 1 = y) with greedy pairing of
/// consecutive perpendicular moves.
PathCost stairwise_cost(std::span<const int> moves);

/// Shortest crossing from each start-boundary row (or column), ending with the
/// step out of the far boundary. Empty entries have no path.
std::vector<std::optional<PathCost>> crossing_costs(const PoreImage& image, Axis axis);

inline constexpr double kBlockedTortuosity = 1e6;

double tortuosity(const PoreImage& image, Axis axis);

long max_flow(const PoreImage& image, Axis axis);

// ---------------------------------------------------------------------------
// Assembly

inline constexpr int kMetricCount = 21;

struct MetricsVector {
  double tau_x = 1.0;
  double tau_y = 1.0;
  double flow_x = 0.0;
  double flow_y = 0.0;
  double pore_count = 0.0;
  double pore_mean = 0.0;
  double pore_std = 0.0;
  double phi = 0.0;
  double roughness = 0.0;
  double surface = 0.0;
  std::array<double, 8> gamma{};
  double sigma_d = 0.0;
  double gamma_d = 0.0;
  double kappa_d = 0.0;

  bool blocked_x = false;
  bool blocked_y = false;
  bool roughness_undefined = false;
  bool directionality_undefined = false;

  bool usable() const { return !blocked_x && !blocked_y; }
  std::array<double, kMetricCount> values() const;
  static MetricsVector from_values(std::span<const double> v);
};

const std::array<std::string_view, kMetricCount>& metric_names();

MetricsVector assemble_metrics(const PoreImage& image);

double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace pdl
