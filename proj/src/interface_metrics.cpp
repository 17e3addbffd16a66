#include "pdl/metrics.hpp"

#include <cmath>
#include <numbers>

namespace pdl {

namespace {

// Exposed faces of a solid pixel: +x, -x, +row, -row.
std::array<bool, 4> exposed_faces(const PoreImage& img, int x, int y) {
  return {img.is_void_wrapped(x + 1, y), img.is_void_wrapped(x - 1, y), img.is_void_wrapped(x, y + 1),
          img.is_void_wrapped(x, y - 1)};
}

}  // namespace

double surface_area(const PoreImage& image) {
  const double h = image.pixel_size();
  double length = 0.0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      if (image.is_void(x, y)) continue;
      const auto f = exposed_faces(image, x, y);
      const int n = f[0] + f[1] + f[2] + f[3];
      switch (n) {
        case 1: length += h; break;
        case 2: length += ((f[0] && f[1]) || (f[2] && f[3])) ? 2.0 * h : std::numbers::sqrt2 * h; break;
        case 3: length += std::numbers::sqrt2 * h; break;
        case 4: length += 4.0 * h; break;
        default: break;
      }
    }
  const double area = image.width() * h * image.height() * h;
  return length / area;
}

long mixed_box_count(const PoreImage& image, int box) {
  const int w = image.width();
  const int h = image.height();
  long count = 0;
  for (int by = 0; by < h; by += box)
    for (int bx = 0; bx < w; bx += box) {
      const auto block = image.cells().block(by, bx, std::min(box, h - by), std::min(box, w - bx));
      if (block.any() && !block.all()) ++count;
    }
  return count;
}

Roughness roughness_dimension(const PoreImage& image) {
  int top = 1;
  while (top < std::max(image.width(), image.height())) top *= 2;
  Roughness r;
  for (int box = top; box >= 1; box /= 2) {
    const long n = mixed_box_count(image, box);
    if (n == 0) continue;
    r.box_sizes.push_back(box);
    r.counts.push_back(n);
  }
  if (r.box_sizes.size() < 2) return r;

  // least squares slope of log N against -log L
  const std::size_t m = r.box_sizes.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double xi = -std::log(static_cast<double>(r.box_sizes[i]));
    const double yi = std::log(static_cast<double>(r.counts[i]));
    sx += xi;
    sy += yi;
    sxx += xi * xi;
    sxy += xi * yi;
  }
  const double n = static_cast<double>(m);
  r.dimension = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  r.defined = true;
  return r;
}

void directionality_statistics(Directionality& d) {
  double mean = 0.0;
  for (double g : d.gamma) mean += g;
  mean /= 8.0;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double g : d.gamma) {
    const double e = g - mean;
    m2 += e * e;
    m3 += e * e * e;
    m4 += e * e * e * e;
  }
  m2 /= 8.0;
  m3 /= 8.0;
  m4 /= 8.0;
  d.sigma = std::sqrt(m2);
  if (d.sigma > 0.0) {
    d.skewness = m3 / (m2 * d.sigma);
    d.kurtosis = m4 / (m2 * m2);
  } else {
    d.skewness = 0.0;
    d.kurtosis = 0.0;
  }
}

Directionality directionality(const PoreImage& image) {
  Directionality d;
  double total = 0.0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      if (image.is_void(x, y)) continue;
      const auto f = exposed_faces(image, x, y);
      if (!(f[0] || f[1] || f[2] || f[3])) continue;
      const int nx = int(f[0]) - int(f[1]);
      const int ny = int(f[2]) - int(f[3]);
      if (nx == 0 && ny == 0) {
        // opposite faces cancel: split over the cancelling pair, x first
        if (f[0]) {
          d.gamma[0] += 0.5;
          d.gamma[4] += 0.5;
        } else {
          d.gamma[2] += 0.5;
          d.gamma[6] += 0.5;
        }
      } else {
        const double angle = std::atan2(static_cast<double>(ny), static_cast<double>(nx));
        const int bin = static_cast<int>(std::lround(angle / (std::numbers::pi / 4.0)));
        d.gamma[wrap(bin, 8)] += 1.0;
      }
      total += 1.0;
    }
  if (total == 0.0) return d;
  for (double& g : d.gamma) g /= total;
  d.defined = true;
  directionality_statistics(d);
  return d;
}

}  // namespace pdl
