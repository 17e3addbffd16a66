#include "pdl/geometry.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace pdl {

PoreImage::PoreImage(Mask void_cells, double pixel_size) : cells_(std::move(void_cells)), pixel_size_(pixel_size) {
  if (cells_.rows() < 2 || cells_.cols() < 2)
    throw Error(ErrorCode::InvalidArgument, "pore image must be at least 2x2");
  if (!(pixel_size_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "pixel size must be positive");
}

PoreImage PoreImage::filled(int width, int height, bool is_void, double length) {
  return PoreImage(Mask::Constant(height, width, is_void), length / width);
}

PoreImage PoreImage::shifted(int dx, int dy) const {
  Mask out(height(), width());
  for (int y = 0; y < height(); ++y)
    for (int x = 0; x < width(); ++x) out(wrap(y + dy, height()), wrap(x + dx, width())) = cells_(y, x);
  return PoreImage(std::move(out), pixel_size_);
}

PoreImage PoreImage::flipped_rows() const { return PoreImage(cells_.colwise().reverse(), pixel_size_); }

PoreImage PoreImage::transposed() const { return PoreImage(cells_.transpose(), pixel_size_); }

GridT<int> label_void_components(const PoreImage& image, int* component_count) {
  const int w = image.width();
  const int h = image.height();
  GridT<int> labels = GridT<int>::Constant(h, w, -1);
  std::vector<int> stack;
  int next = 0;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!image.is_void(x0, y0) || labels(y0, x0) >= 0) continue;
      labels(y0, x0) = next;
      stack.push_back(y0 * w + x0);
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int x = idx % w;
        const int y = idx / w;
        const std::array<std::array<int, 2>, 4> nbrs{{{wrap(x + 1, w), y}, {wrap(x - 1, w), y}, {x, wrap(y + 1, h)}, {x, wrap(y - 1, h)}}};
        for (const auto& [nx, ny] : nbrs) {
          if (image.is_void(nx, ny) && labels(ny, nx) < 0) {
            labels(ny, nx) = next;
            stack.push_back(ny * w + nx);
          }
        }
      }
      ++next;
    }
  }
  if (component_count) *component_count = next;
  return labels;
}

FilterResult filter_periodic_connectivity(const PoreImage& image) {
  int count = 0;
  const GridT<int> labels = label_void_components(image, &count);
  if (count == 0) throw Error(ErrorCode::DegenerateGeometry, "geometry has no void pixels");

  std::vector<long> sizes(count, 0);
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (labels.data()[i] >= 0) ++sizes[labels.data()[i]];
  int keep = 0;
  for (int c = 1; c < count; ++c)
    if (sizes[c] > sizes[keep]) keep = c;

  Mask cells = labels == keep;
  const long removed = image.void_count() - sizes[keep];
  return {PoreImage(std::move(cells), image.pixel_size()), removed};
}

// ---------------------------------------------------------------------------

namespace {

struct Rotation {
  double c = 1.0;
  double s = 0.0;
};

// Quarter turns are snapped so mirror-symmetric cells rasterize symmetrically.
Rotation rotation_for(double degrees) {
  const double turns = degrees / 90.0;
  if (turns == std::round(turns)) {
    switch (wrap(static_cast<int>(std::llround(turns) % 4), 4)) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, -1.0};
    }
  }
  const double rad = degrees * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

struct Shape {
  ShapeSpec spec;
  Rotation rot;

  // Offset (dx, dy) from the cell centre into the shape frame.
  Vec2 local(double dx, double dy) const { return {rot.c * dx + rot.s * dy, -rot.s * dx + rot.c * dy}; }
  Vec2 world(double lx, double ly) const { return {rot.c * lx - rot.s * ly, rot.s * lx + rot.c * ly}; }

  bool contains(double dx, double dy) const {
    const Vec2 p = local(dx, dy);
    const double r = spec.size;
    switch (spec.kind) {
      case ShapeKind::Circle: return p.squaredNorm() < r * r;
      case ShapeKind::Square: return std::abs(p.x()) < 0.5 * r && std::abs(p.y()) < 0.5 * r;
      case ShapeKind::Ellipse: {
        const double a = r * std::sqrt(spec.aspect);
        const double b = r * std::sqrt(1.0 / spec.aspect);
        const double u = p.x() / a;
        const double v = p.y() / b;
        return u * u + v * v < 1.0;
      }
      case ShapeKind::Triangle: {
        const auto v = triangle_vertices();
        for (int k = 0; k < 3; ++k) {
          const Vec2& a = v[k];
          const Vec2& b = v[(k + 1) % 3];
          const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
          if (cross <= 0.0) return false;
        }
        return true;
      }
    }
    return false;
  }

  // Counter-clockwise, centroid at the origin.
  std::array<Vec2, 3> triangle_vertices() const {
    const double s = spec.size;
    const double circum = s / std::sqrt(3.0);
    return {Vec2(0.0, circum), Vec2(-0.5 * s, -0.5 * circum), Vec2(0.5 * s, -0.5 * circum)};
  }

  // Half extents of the axis-aligned bounding box in world coordinates.
  Vec2 half_extent() const {
    const double r = spec.size;
    switch (spec.kind) {
      case ShapeKind::Circle: return {r, r};
      case ShapeKind::Ellipse: {
        const double a = r * std::sqrt(spec.aspect);
        const double b = r * std::sqrt(1.0 / spec.aspect);
        return {std::sqrt(a * a * rot.c * rot.c + b * b * rot.s * rot.s),
                std::sqrt(a * a * rot.s * rot.s + b * b * rot.c * rot.c)};
      }
      case ShapeKind::Square: {
        Vec2 e(0.0, 0.0);
        for (const double sx : {-0.5, 0.5})
          for (const double sy : {-0.5, 0.5}) e = e.cwiseMax(world(sx * r, sy * r).cwiseAbs());
        return e;
      }
      case ShapeKind::Triangle: {
        Vec2 e(0.0, 0.0);
        for (const Vec2& v : triangle_vertices()) e = e.cwiseMax(world(v.x(), v.y()).cwiseAbs());
        return e;
      }
    }
    return {0.0, 0.0};
  }
};

}  // namespace

PoreImage rasterize_shape(const ShapeSpec& spec, int resolution) {
  if (resolution < 2) throw Error(ErrorCode::InvalidArgument, "resolution must be at least 2");
  if (spec.size < 0.0) throw Error(ErrorCode::InvalidArgument, "shape size must be non-negative");
  if (spec.kind == ShapeKind::Ellipse && !(spec.aspect > 0.0))
    throw Error(ErrorCode::InvalidArgument, "ellipse aspect must be positive");

  const Shape shape{spec, rotation_for(spec.rotation_deg)};
  const Vec2 extent = shape.half_extent();
  if (extent.maxCoeff() >= 0.5)
    throw Error(ErrorCode::ShapeOutOfBounds, std::string(to_string(spec.kind)) + " of size " +
                                                 std::to_string(spec.size) + " reaches the cell boundary");

  Mask cells(resolution, resolution);
  const double h = 1.0 / resolution;
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x) cells(y, x) = !shape.contains((x + 0.5) * h - 0.5, (y + 0.5) * h - 0.5);
  return PoreImage(std::move(cells), h);
}

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Circle: return "circle";
    case ShapeKind::Square: return "square";
    case ShapeKind::Ellipse: return "ellipse";
    case ShapeKind::Triangle: return "triangle";
  }
  return "unknown";
}

ShapeKind shape_kind_from_string(std::string_view name) {
  for (const auto kind : {ShapeKind::Circle, ShapeKind::Square, ShapeKind::Ellipse, ShapeKind::Triangle})
    if (to_string(kind) == name) return kind;
  throw Error(ErrorCode::InvalidArgument, "unknown shape kind '" + std::string(name) + "'");
}

}  // namespace pdl
