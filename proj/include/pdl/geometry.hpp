#pragma once

#include "pdl/errors.hpp"
#include "pdl/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace pdl {

/// Periodic binary pore geometry. `true` cells are void, `false` cells are solid.
///
/// The unit cell spans a square of side `length`, so `pixel_size = length / width`.
/// Instances are immutable once built.
class PoreImage {
 public:
  PoreImage() = default;
  PoreImage(Mask void_cells, double pixel_size);

  static PoreImage filled(int width, int height, bool is_void, double length = 1.0);

  int width() const noexcept { return static_cast<int>(cells_.cols()); }
  int height() const noexcept { return static_cast<int>(cells_.rows()); }
  double pixel_size() const noexcept { return pixel_size_; }
  const Mask& cells() const noexcept { return cells_; }

  bool is_void(int x, int y) const { return cells_(y, x); }
  bool is_solid(int x, int y) const { return !cells_(y, x); }
  /// Periodic lookup; any integer coordinates are accepted.
  bool is_void_wrapped(int x, int y) const { return cells_(wrap(y, height()), wrap(x, width())); }

  long void_count() const { return static_cast<long>(cells_.count()); }
  double void_fraction() const { return static_cast<double>(void_count()) / static_cast<double>(cells_.size()); }

  PoreImage shifted(int dx, int dy) const;
  /// Mirror across the x axis (row order reversed).
  PoreImage flipped_rows() const;
  PoreImage transposed() const;

  bool operator==(const PoreImage& other) const {
    return pixel_size_ == other.pixel_size_ && cells_.rows() == other.cells_.rows() &&
           cells_.cols() == other.cells_.cols() && (cells_ == other.cells_).all();
  }

 private:
  Mask cells_;
  double pixel_size_ = 1.0;
};

// ---------------------------------------------------------------------------
// PBM storage. Bit 1 (black) is solid, bit 0 (white) is void.

enum class PbmFormat { Plain, Binary };

PoreImage parse_pbm(std::string_view bytes, double length = 1.0);
std::string encode_pbm(const PoreImage& image, PbmFormat format);

PoreImage load_pbm(const std::filesystem::path& path, double length = 1.0);
void save_pbm(const PoreImage& image, const std::filesystem::path& path, PbmFormat format = PbmFormat::Binary);

// ---------------------------------------------------------------------------
// Connectivity

/// Labels of periodic 4-connected void components; -1 for solid cells.
/// Labels are assigned in row-major scan order of each component's first pixel.
GridT<int> label_void_components(const PoreImage& image, int* component_count = nullptr);

struct FilterResult {
  PoreImage image;
  long removed = 0;
};

/// Keeps the largest periodically connected void component; other void turns solid.
/// Ties go to the component holding the first void pixel in scan order.
FilterResult filter_periodic_connectivity(const PoreImage& image);

// ---------------------------------------------------------------------------
// Single-inclusion verification cells

enum class ShapeKind { Circle, Square, Ellipse, Triangle };

struct ShapeSpec {
  ShapeKind kind = ShapeKind::Circle;
  /// Circle: radius / L. Ellipse: equal-area radius / L. Square and triangle: side / L.
  double size = 0.0;
  /// Ellipse semi-axis ratio a/b; ignored by other shapes.
  double aspect = 1.0;
  double rotation_deg = 0.0;
};

/// Pixel-center sampling of a shape centred in the unit cell. Throws when the
/// shape reaches the cell boundary.
PoreImage rasterize_shape(const ShapeSpec& spec, int resolution);

std::string_view to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(std::string_view name);

// ---------------------------------------------------------------------------
// Random periodic generators

enum class GeneratorKind { Perlin, Fractal, Voronoi };

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Perlin;
  std::uint64_t seed = 0;
  double porosity = 0.7;
  /// Perlin/fractal: gradient lattice cells across the image. Voronoi: seed count.
  int scale = 4;
  /// Fractal only; octave k uses a lattice 2^k finer at amplitude 0.5^k.
  int octaves = 3;
};

struct Generation {
  PoreImage raw;       ///< thresholded field before connectivity filtering
  PoreImage image;     ///< filtered result
  double threshold = 0.0;
  long removed = 0;
};

Generation generate_with_report(const GeneratorSpec& spec, int resolution);
PoreImage generate(const GeneratorSpec& spec, int resolution);

/// Continuous periodic field behind the perlin/fractal generators (for tests).
Grid periodic_noise_field(const GeneratorSpec& spec, int resolution);

std::string_view to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(std::string_view name);

/// Double in [0, 1) from 53 raw bits; platform independent.
inline double unit_double(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace pdl
