#include "pdl/metrics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

namespace pdl {

double PathCost::length() const { return single + pairs * std::numbers::sqrt2; }

PathCost stairwise_cost(std::span<const int> moves) {
  PathCost c;
  std::size_t i = 0;
  while (i < moves.size()) {
    if (i + 1 < moves.size() && moves[i] != moves[i + 1]) {
      ++c.pairs;
      i += 2;
    } else {
      ++c.single;
      ++i;
    }
  }
  return c;
}

namespace {

// Views the image so that the crossing always runs along +x with y wrapping.
struct AxisView {
  const PoreImage& img;
  bool transpose;
  int w() const { return transpose ? img.height() : img.width(); }
  int h() const { return transpose ? img.width() : img.height(); }
  bool open(int x, int y) const { return transpose ? img.is_void(y, x) : img.is_void(x, y); }
};

bool cheaper(const PathCost& a, const PathCost& b) {
  const long double la = a.single + a.pairs * std::numbers::sqrt2_v<long double>;
  const long double lb = b.single + b.pairs * std::numbers::sqrt2_v<long double>;
  return la < lb;
}

}  // namespace

std::vector<std::optional<PathCost>> crossing_costs(const PoreImage& image, Axis axis) {
  const AxisView g{image, axis == Axis::Y};
  const int w = g.w();
  const int h = g.h();
  std::vector<std::optional<PathCost>> out(static_cast<std::size_t>(h));

  // State: pixel and the axis of a still-unpaired previous move (0 none, 1 x, 2 y).
  const int states = w * h * 3;
  std::vector<PathCost> best(states);
  std::vector<char> seen(states);
  struct Entry {
    PathCost cost;
    int state;
    bool operator<(const Entry& o) const { return cheaper(o.cost, cost); }
  };

  auto advance = [](PathCost c, int pending, int move, int& next_pending) {
    if (pending != 0 && pending != move) {
      --c.single;
      ++c.pairs;
      next_pending = 0;
    } else {
      ++c.single;
      next_pending = move;
    }
    return c;
  };

  for (int y0 = 0; y0 < h; ++y0) {
    if (!g.open(0, y0)) continue;
    std::fill(seen.begin(), seen.end(), 0);
    std::vector<char> reached(states, 0);
    std::priority_queue<Entry> queue;
    const int s0 = (y0 * w) * 3;
    best[s0] = {};
    reached[s0] = 1;
    queue.push({{}, s0});
    std::optional<PathCost> result;
    while (!queue.empty()) {
      const Entry e = queue.top();
      queue.pop();
      if (seen[e.state]) continue;
      seen[e.state] = 1;
      const int pending = e.state % 3;
      const int cell = e.state / 3;
      const int x = cell % w;
      const int y = cell / w;
      if (x == w - 1) {
        int np;
        const PathCost done = advance(e.cost, pending, 1, np);
        if (!result || cheaper(done, *result)) result = done;
      }
      // every later pop costs at least as much as this entry
      if (result && !cheaper(e.cost, *result)) break;
      const std::array<std::array<int, 3>, 4> moves{{{x + 1, y, 1}, {x - 1, y, 1}, {x, wrap(y + 1, h), 2}, {x, wrap(y - 1, h), 2}}};
      for (const auto& [nx, ny, axis_move] : moves) {
        if (nx < 0 || nx >= w || !g.open(nx, ny)) continue;
        int np;
        const PathCost c = advance(e.cost, pending, axis_move, np);
        const int ns = (ny * w + nx) * 3 + np;
        if (seen[ns]) continue;
        if (!reached[ns] || cheaper(c, best[ns])) {
          reached[ns] = 1;
          best[ns] = c;
          queue.push({c, ns});
        }
      }
    }
    out[static_cast<std::size_t>(y0)] = result;
  }
  return out;
}

double tortuosity(const PoreImage& image, Axis axis) {
  const auto costs = crossing_costs(image, axis);
  const int span = axis == Axis::X ? image.width() : image.height();
  double sum = 0.0;
  long n = 0;
  for (const auto& c : costs)
    if (c) {
      sum += c->length();
      ++n;
    }
  if (n == 0) throw Error(ErrorCode::BlockedAxis, std::string("no void path crosses the cell along ") + (axis == Axis::X ? "x" : "y"));
  return sum / static_cast<double>(n) / static_cast<double>(span);
}

namespace {

// Dinic on an undirected unit-capacity graph plus source/sink arcs.
class Dinic {
 public:
  explicit Dinic(int n) : head_(n, -1), level_(n), it_(n) {}

  void add_undirected(int a, int b, long cap) {
    add(a, b, cap, cap);
  }
  void add_arc(int a, int b, long cap) { add(a, b, cap, 0); }

  long run(int s, int t) {
    long flow = 0;
    while (bfs(s, t)) {
      it_ = head_;
      while (long f = dfs(s, t, std::numeric_limits<long>::max())) flow += f;
    }
    return flow;
  }

 private:
  struct Arc {
    int to;
    int next;
    long cap;
  };
  std::vector<Arc> arcs_;
  std::vector<int> head_;
  std::vector<int> level_;
  std::vector<int> it_;

  void add(int a, int b, long cab, long cba) {
    arcs_.push_back({b, head_[a], cab});
    head_[a] = static_cast<int>(arcs_.size()) - 1;
    arcs_.push_back({a, head_[b], cba});
    head_[b] = static_cast<int>(arcs_.size()) - 1;
  }

  bool bfs(int s, int t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<int> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int e = head_[u]; e >= 0; e = arcs_[e].next)
        if (arcs_[e].cap > 0 && level_[arcs_[e].to] < 0) {
          level_[arcs_[e].to] = level_[u] + 1;
          q.push(arcs_[e].to);
        }
    }
    return level_[t] >= 0;
  }

  long dfs(int u, int t, long limit) {
    if (u == t) return limit;
    for (int& e = it_[u]; e >= 0; e = arcs_[e].next) {
      Arc& a = arcs_[e];
      if (a.cap <= 0 || level_[a.to] != level_[u] + 1) continue;
      if (long f = dfs(a.to, t, std::min(limit, a.cap)); f > 0) {
        a.cap -= f;
        arcs_[e ^ 1].cap += f;
        return f;
      }
    }
    return 0;
  }
};

}  // namespace

long max_flow(const PoreImage& image, Axis axis) {
  const AxisView g{image, axis == Axis::Y};
  const int w = g.w();
  const int h = g.h();
  const int source = w * h;
  const int sink = source + 1;
  const long big = static_cast<long>(w) * h * 4 + 1;
  Dinic net(w * h + 2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!g.open(x, y)) continue;
      const int id = y * w + x;
      if (x + 1 < w && g.open(x + 1, y)) net.add_undirected(id, id + 1, 1);
      // tangential wrap; skip the duplicate edge when h == 2
      const int yn = wrap(y + 1, h);
      if (g.open(x, yn) && (y + 1 < h || h > 2)) net.add_undirected(id, yn * w + x, 1);
      if (x == 0) net.add_arc(source, id, big);
      if (x == w - 1) net.add_arc(id, sink, big);
    }
  return net.run(source, sink);
}

}  // namespace pdl
