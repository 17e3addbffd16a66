#pragma once

#include "pdl/geometry.hpp"
#include "pdl/grid.hpp"

#include <filesystem>
#include <vector>

namespace pdl {

struct FluidProps {
  double density = 1.0;
  double viscosity = 1.0;
  Vec2 body_force = Vec2(1.0, 0.0);
};

struct FlowOptions {
  /// Adds the convective term through damped Picard iterations.
  bool navier_stokes = false;
  int picard_max_iterations = 50;
  double picard_damping = 0.7;
  /// Relative residual bound for momentum and mass rows.
  double tolerance = 1e-9;
  int max_refinement_steps = 4;
};

/// Staggered (MAC) flow solution on a W x H periodic cell.
///
/// `u(y, x)` lives on the face between cells (x-1, y) and (x, y); `v(y, x)` on the
/// face between (x, y-1) and (x, y); `p(y, x)` at the centre of (x, y). Index 0
/// doubles as index N through periodicity.
struct FlowField {
  int width = 0;
  int height = 0;
  double pixel_size = 1.0;
  Grid u;
  Grid v;
  Grid p;

  static FlowField zeros(int width, int height, double pixel_size);

  /// Mirror across the x axis: u mirrored, v mirrored and negated.
  FlowField flipped_rows() const;
  FlowField shifted(int dx, int dy) const;
  FlowField scaled(double k) const;
};

struct FlowReport {
  int iterations = 0;                    ///< linear solves performed
  std::vector<double> residual_history;  ///< relative linear residual (Stokes) or Picard update norm
  double max_divergence = 0.0;           ///< max |net face outflow| / mean |face speed|
  long unknowns = 0;
};

FlowField solve_flow(const PoreImage& image, const FluidProps& props = {}, const FlowOptions& opts = {},
                     FlowReport* report = nullptr);

/// Cell-centred velocity: mean of the two bounding face values per component, zero in solids.
struct CenterVelocity {
  Grid x;
  Grid y;
};
CenterVelocity interpolate_to_centers(const FlowField& field, const PoreImage& image);

/// Max over void cells of |net outflow| relative to the mean face speed.
double relative_divergence(const FlowField& field, const PoreImage& image);

// ---------------------------------------------------------------------------
// Binary field container shared by flow fields and concentration snapshots:
//   "PDLF" | u32 version | u32 width | u32 height | f64 pixel_size | u32 count |
//   count arrays of width*height f64, row-major; all little-endian.

struct FieldFile {
  int width = 0;
  int height = 0;
  double pixel_size = 1.0;
  std::vector<Grid> arrays;
};

inline constexpr std::uint32_t kFieldFileVersion = 1;

std::string encode_field_file(const FieldFile& file);
FieldFile decode_field_file(std::string_view bytes);
void write_field_file(const FieldFile& file, const std::filesystem::path& path);
FieldFile read_field_file(const std::filesystem::path& path);

void save_flow(const FlowField& field, const std::filesystem::path& path);
FlowField load_flow(const std::filesystem::path& path);

}  // namespace pdl
