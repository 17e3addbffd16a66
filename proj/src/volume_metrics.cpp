#include "pdl/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace pdl {

double porosity(const PoreImage& image) {
  int n = 0;
  const GridT<int> labels = label_void_components(image, &n);
  if (n == 0) return 0.0;
  std::vector<long> sizes(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (labels(i) >= 0) ++sizes[static_cast<std::size_t>(labels(i))];
  return static_cast<double>(*std::max_element(sizes.begin(), sizes.end())) / static_cast<double>(labels.size());
}

namespace {

constexpr long kFar = std::numeric_limits<long>::max() / 4;

// Squared distance transform of one sampled function (Felzenszwalb and Huttenlocher).
void edt_1d(const std::vector<long>& f, std::vector<long>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kFar) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = (static_cast<double>(f[q] + static_cast<long>(q) * q) - static_cast<double>(f[p] + static_cast<long>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {  // k == 0: q dominates everywhere
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  d.assign(n, kFar);
  if (k < 0) return;
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const long dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace

GridT<long> periodic_distance_squared(const PoreImage& image) {
  const int w = image.width();
  const int h = image.height();
  if (image.void_count() == static_cast<long>(image.cells().size())) return GridT<long>::Constant(h, w, -1);

  GridT<long> g(h, w);
  std::vector<long> f, d;
  for (int x = 0; x < w; ++x) {
    f.assign(3 * h, kFar);
    for (int t = 0; t < 3 * h; ++t)
      if (image.is_solid(x, t % h)) f[t] = 0;
    edt_1d(f, d);
    for (int y = 0; y < h; ++y) g(y, x) = d[h + y];
  }
  GridT<long> out(h, w);
  for (int y = 0; y < h; ++y) {
    f.assign(3 * w, kFar);
    for (int t = 0; t < 3 * w; ++t) f[t] = g(y, t % w);
    edt_1d(f, d);
    for (int x = 0; x < w; ++x) out(y, x) = d[w + x];
  }
  return out;
}

double Segmentation::mean_size() const {
  if (sizes.empty()) return 0.0;
  return std::accumulate(sizes.begin(), sizes.end(), 0.0) / static_cast<double>(sizes.size());
}

double Segmentation::std_size() const {
  if (sizes.empty()) return 0.0;
  const double m = mean_size();
  double s = 0.0;
  for (long v : sizes) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(sizes.size()));
}

Segmentation segment_pores(const PoreImage& image, int peak_radius) {
  const int w = image.width();
  const int h = image.height();
  Segmentation seg;
  seg.labels = GridT<int>::Constant(h, w, -1);
  if (image.void_count() == 0) return seg;
  const GridT<long> dist = periodic_distance_squared(image);
  if (dist(0, 0) < 0) {
    seg.labels.setZero();
    seg.sizes.push_back(static_cast<long>(image.cells().size()));
    return seg;
  }

  const int r = peak_radius;
  GridT<bool> candidate = GridT<bool>::Constant(h, w, false);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!image.is_void(x, y)) continue;
      bool peak = true;
      for (int dy = -r; dy <= r && peak; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (dist(wrap(y + dy, h), wrap(x + dx, w)) > dist(y, x)) {
            peak = false;
            break;
          }
      candidate(y, x) = peak;
    }

  // Merge candidates within Chebyshev distance r.
  std::vector<int> parent(static_cast<std::size_t>(w) * h);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!candidate(y, x)) continue;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = wrap(y + dy, h);
          const int xx = wrap(x + dx, w);
          if (!candidate(yy, xx)) continue;
          const int a = find(y * w + x);
          const int b = find(yy * w + xx);
          if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }

  struct Item {
    long dist;
    long order;
    int index;
    bool operator<(const Item& o) const { return dist != o.dist ? dist < o.dist : order > o.order; }
  };
  std::priority_queue<Item> queue;
  long order = 0;
  std::vector<int> marker_label(parent.size(), -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!candidate(y, x)) continue;
      const int root = find(y * w + x);
      if (marker_label[root] < 0) {
        marker_label[root] = seg.count();
        seg.sizes.push_back(0);
      }
      seg.labels(y, x) = marker_label[root];
      ++seg.sizes[marker_label[root]];
      queue.push({dist(y, x), order++, y * w + x});
    }

  auto flood = [&] {
    while (!queue.empty()) {
      const Item it = queue.top();
      queue.pop();
      const int x = it.index % w;
      const int y = it.index / w;
      const int label = seg.labels(y, x);
      const std::array<std::pair<int, int>, 4> nbrs{{{wrap(x + 1, w), y}, {wrap(x - 1, w), y}, {x, wrap(y + 1, h)}, {x, wrap(y - 1, h)}}};
      for (const auto& [nx, ny] : nbrs) {
        if (!image.is_void(nx, ny) || seg.labels(ny, nx) >= 0) continue;
        seg.labels(ny, nx) = label;
        ++seg.sizes[label];
        queue.push({dist(ny, nx), order++, ny * w + nx});
      }
    }
  };
  flood();
  // void pockets that hold no peak of their own become single regions
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!image.is_void(x, y) || seg.labels(y, x) >= 0) continue;
      seg.labels(y, x) = seg.count();
      seg.sizes.push_back(1);
      queue.push({dist(y, x), order++, y * w + x});
      flood();
    }
  return seg;
}

}  // namespace pdl
