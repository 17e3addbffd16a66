#include "pdl/transport.hpp"

#include <json.hpp>

#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace pdl {

ExtendedDomain::ExtendedDomain(PoreImage base, FlowField flow) : base_(std::move(base)), flow_(std::move(flow)) {
  if (flow_.width != base_.width() || flow_.height != base_.height())
    throw Error(ErrorCode::InvalidArgument, "flow field does not match geometry dimensions");
}

ExtendedDomain build_extended(const PoreImage& image, const FlowField& field) { return ExtendedDomain(image, field); }

Window detect_window(std::span<const double> center_mean, double eps_in, double eps_out) {
  Window w{-1, -1};
  for (std::size_t i = 0; i < center_mean.size(); ++i) {
    if (w.start < 0 && center_mean[i] > eps_in) w.start = static_cast<long>(i);
    if (center_mean[i] > 1.0 - eps_out) {
      w.end = static_cast<long>(i);
      break;
    }
  }
  if (w.start < 0 || w.end < 0) throw Error(ErrorCode::Timeout, "evaluation window never closed");
  return w;
}

namespace {

constexpr double kQuantum = 0x1.0p-50;

// Rounds per-step transfer fractions to multiples of kQuantum, then routes the
// integer divergence residuals along a spanning tree of the void cells so
// every cell balances exactly.
void quantize_divergence_free(const PoreImage& image, const Grid& wu_real, const Grid& wv_real, Grid& wu, Grid& wv) {
  const int w = image.width();
  const int h = image.height();
  using Counts = GridT<long long>;
  Counts qu = Counts::Zero(h, w);
  Counts qv = Counts::Zero(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (image.is_void(x, y) && image.is_void_wrapped(x - 1, y)) qu(y, x) = std::llround(wu_real(y, x) / kQuantum);
      if (image.is_void(x, y) && image.is_void_wrapped(x, y - 1)) qv(y, x) = std::llround(wv_real(y, x) / kQuantum);
    }

  auto residual = [&](int x, int y) {
    return qu(y, wrap(x + 1, w)) - qu(y, x) + qv(wrap(y + 1, h), x) - qv(y, x);
  };

  // BFS spanning forest through open faces; one root per component.
  GridT<int> parent_dir = GridT<int>::Constant(h, w, -2);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(image.void_count()));
  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      if (!image.is_void(x0, y0) || parent_dir(y0, x0) != -2) continue;
      parent_dir(y0, x0) = -1;
      std::deque<int> queue{y0 * w + x0};
      while (!queue.empty()) {
        const int idx = queue.front();
        queue.pop_front();
        order.push_back(idx);
        const int x = idx % w;
        const int y = idx / w;
        // dir: 0 = parent is +x, 1 = parent is -x, 2 = parent is +y, 3 = parent is -y
        const std::array<std::array<int, 3>, 4> nbrs{{{wrap(x + 1, w), y, 1}, {wrap(x - 1, w), y, 0},
                                                      {x, wrap(y + 1, h), 3}, {x, wrap(y - 1, h), 2}}};
        for (const auto& [nx, ny, dir] : nbrs) {
          if (image.is_void(nx, ny) && parent_dir(ny, nx) == -2) {
            parent_dir(ny, nx) = dir;
            queue.push_back(ny * w + nx);
          }
        }
      }
    }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int x = *it % w;
    const int y = *it / w;
    const long long r = residual(x, y);
    if (r == 0) continue;
    switch (parent_dir(y, x)) {
      case 0: qu(y, wrap(x + 1, w)) -= r; break;  // more outflow through the +x face
      case 1: qu(y, x) += r; break;
      case 2: qv(wrap(y + 1, h), x) -= r; break;
      case 3: qv(y, x) += r; break;
      default: break;  // component root: residual is zero by telescoping
    }
  }

  wu = qu.cast<double>() * kQuantum;
  wv = qv.cast<double>() * kQuantum;
}

}  // namespace

UpwindAdvector::UpwindAdvector(const ExtendedDomain& domain, double cfl, bool allow_stagnant) {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw Error(ErrorCode::InvalidArgument, "cfl must lie in (0, 1]");
  const PoreImage& image = domain.base();
  const FlowField& flow = domain.flow();
  base_width_ = image.width();
  width_ = domain.width();
  height_ = domain.height();
  const int bw = base_width_;
  const double hs = image.pixel_size();

  // Largest face speed and largest per-cell outflow speed.
  double umax = 0.0;
  double out_max = 0.0;
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < bw; ++x) {
      umax = std::max({umax, std::abs(flow.u(y, x)), std::abs(flow.v(y, x))});
      if (!image.is_void(x, y)) continue;
      const double out = std::max(flow.u(y, wrap(x + 1, bw)), 0.0) + std::max(-flow.u(y, x), 0.0) +
                         std::max(flow.v(wrap(y + 1, height_), x), 0.0) + std::max(-flow.v(y, x), 0.0);
      out_max = std::max(out_max, out);
    }
  double through = 0.0;
  for (int y = 0; y < height_; ++y) through += flow.u(y, 0);
  if (umax == 0.0 || through <= 1e-9 * umax * height_) {
    if (!allow_stagnant)
      throw Error(ErrorCode::Stagnation, umax == 0.0 ? "flow field is stagnant" : "no net throughflow along x");
  }
  if (umax == 0.0) {
    dt_ = 1.0;
  } else {
    dt_ = cfl * hs / std::max(umax, out_max);
  }

  quantize_divergence_free(image, flow.u * (dt_ / hs), flow.v * (dt_ / hs), wu_, wv_);

  cell_index_ = GridT<int>::Constant(height_, width_, -1);
  int n = 0;
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (domain.is_void(x, y)) cell_index_(y, x) = n++;
  const int ghost = n;
  c_.assign(n + 1, 0.0);
  c_[ghost] = 1.0;
  next_ = c_;
  keep_.assign(n, 1.0);
  in_index_.assign(n, {0, 0, 0, 0});
  in_weight_.assign(n, {0.0, 0.0, 0.0, 0.0});

  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) {
      const int i = cell_index_(y, x);
      if (i < 0) continue;
      double out = 0.0;
      int slot = 0;
      auto inflow = [&](int from, double weight) {
        in_index_[i][slot] = from;
        in_weight_[i][slot] = weight;
        ++slot;
      };
      // left face
      if (const double wl = face_transfer_u(x, y); wl > 0.0) inflow(x == 0 ? ghost : cell_index_(y, x - 1), wl);
      else out -= wl;
      // right face; backflow at the outlet carries the cell's own value
      if (const double wr = face_transfer_u(x + 1, y); wr < 0.0) inflow(x == width_ - 1 ? i : cell_index_(y, x + 1), -wr);
      else out += wr;
      // bottom and top faces, periodic in y
      if (const double wb = face_transfer_v(x, y); wb > 0.0) inflow(cell_index_(wrap(y - 1, height_), x), wb);
      else out -= wb;
      if (const double wt = face_transfer_v(x, y + 1); wt < 0.0) inflow(cell_index_(wrap(y + 1, height_), x), -wt);
      else out += wt;
      keep_[i] = 1.0 - out;

      if (x == 0) {
        inlet_cells_.push_back(i);
        inlet_w_.push_back(face_transfer_u(0, y));
      }
      if (x == width_ - 1) {
        outlet_cells_.push_back(i);
        outlet_w_.push_back(face_transfer_u(width_, y));
      }
      if (x >= bw && x < 2 * bw) center_cells_.push_back(i);
    }
}

void UpwindAdvector::step() {
  const std::size_t n = keep_.size();
  long double change = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& idx = in_index_[i];
    const auto& wt = in_weight_[i];
    double v = keep_[i] * c_[i];
    v += wt[0] * c_[idx[0]];
    v += wt[1] * c_[idx[1]];
    v += wt[2] * c_[idx[2]];
    v += wt[3] * c_[idx[3]];
    next_[i] = v;
    change += static_cast<long double>(v) - static_cast<long double>(c_[i]);
  }

  long double net = 0.0L;
  long double inlet = 0.0L;
  for (std::size_t k = 0; k < inlet_cells_.size(); ++k) {
    const double wl = inlet_w_[k];
    if (wl > 0.0) {
      net += wl;
      inlet += wl;
    } else {
      net += static_cast<long double>(wl) * c_[inlet_cells_[k]];
    }
  }
  for (std::size_t k = 0; k < outlet_cells_.size(); ++k)
    net -= static_cast<long double>(outlet_w_[k]) * c_[outlet_cells_[k]];

  balance_ = {static_cast<double>(change), static_cast<double>(net), static_cast<double>(inlet)};
  std::swap(c_, next_);
  c_.back() = 1.0;
  ++steps_;
}

Grid UpwindAdvector::concentration() const {
  Grid out = Grid::Zero(height_, width_);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (const int i = cell_index_(y, x); i >= 0) out(y, x) = c_[i];
  return out;
}

double UpwindAdvector::center_mean() const {
  if (center_cells_.empty()) return 0.0;
  double sum = 0.0;
  for (const int i : center_cells_) sum += c_[i];
  return sum / static_cast<double>(center_cells_.size());
}

TransportResult advect(const ExtendedDomain& domain, double cfl, const SampleSchedule& schedule) {
  if (schedule.samples < 1) throw Error(ErrorCode::InvalidArgument, "at least one sample is required");
  TransportResult result;
  UpwindAdvector run(domain, cfl);
  result.dt = run.dt();
  result.center_mean.push_back(run.center_mean());

  // First pass: locate the window, keeping the state at the window start.
  std::optional<UpwindAdvector> at_start;
  if (result.center_mean.back() > schedule.eps_in) at_start = run;
  while (result.center_mean.back() <= 1.0 - schedule.eps_out) {
    if (run.steps() >= schedule.max_steps)
      throw Error(ErrorCode::Timeout, "centre block did not saturate within " + std::to_string(schedule.max_steps) +
                                          " steps (mean " + std::to_string(result.center_mean.back()) + ")");
    run.step();
    const StepBalance& b = run.last_balance();
    if (b.inlet_flux > 0.0) result.max_balance_residual = std::max(result.max_balance_residual, b.residual() / b.inlet_flux);
    result.center_mean.push_back(run.center_mean());
    if (!at_start && result.center_mean.back() > schedule.eps_in) at_start = run;
  }
  result.window = detect_window(result.center_mean, schedule.eps_in, schedule.eps_out);
  result.t_start = static_cast<double>(result.window.start) * result.dt;
  result.t_end = static_cast<double>(result.window.end) * result.dt;

  // Second pass from the saved start state.
  UpwindAdvector replay = std::move(*at_start);
  const long span = result.window.end - result.window.start;
  result.min_concentration = std::numeric_limits<double>::infinity();
  result.max_concentration = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < schedule.samples; ++k) {
    const long target = schedule.samples == 1
                            ? result.window.start
                            : result.window.start + std::lround(static_cast<double>(k) * span / (schedule.samples - 1));
    while (replay.steps() < target) replay.step();
    ConcentrationSnapshot snap{replay.time(), replay.steps(), replay.concentration()};
    result.min_concentration = std::min(result.min_concentration, snap.c.minCoeff());
    result.max_concentration = std::max(result.max_concentration, snap.c.maxCoeff());
    result.snapshots.push_back(std::move(snap));
  }
  return result;
}

void save_snapshots(const TransportResult& result, const ExtendedDomain& domain, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["schema_version"] = 1;
  meta["dt"] = result.dt;
  meta["window"] = {{"start_step", result.window.start}, {"end_step", result.window.end},
                    {"t_start", result.t_start}, {"t_end", result.t_end}};
  meta["base_width"] = domain.base_width();
  meta["height"] = domain.height();
  meta["pixel_size"] = domain.pixel_size();
  meta["max_balance_residual"] = result.max_balance_residual;
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t k = 0; k < result.snapshots.size(); ++k) {
    const auto& s = result.snapshots[k];
    std::ostringstream name;
    name << "snap_" << std::setw(3) << std::setfill('0') << k << ".field";
    write_field_file({domain.width(), domain.height(), domain.pixel_size(), {s.c}}, dir / name.str());
    samples.push_back({{"file", name.str()}, {"time", s.time}, {"step", s.step}});
  }
  meta["samples"] = std::move(samples);
  std::ofstream out(dir / "snapshots.json");
  if (!out) throw Error(ErrorCode::Io, "cannot write snapshot sidecar in " + dir.string());
  out << meta.dump(2) << '\n';
}

TransportResult load_snapshots(const std::filesystem::path& dir) {
  std::ifstream in(dir / "snapshots.json");
  if (!in) throw Error(ErrorCode::Io, "missing snapshots.json in " + dir.string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("snapshot sidecar: ") + e.what());
  }
  TransportResult r;
  r.dt = meta.at("dt").get<double>();
  r.window.start = meta.at("window").at("start_step").get<long>();
  r.window.end = meta.at("window").at("end_step").get<long>();
  r.t_start = meta.at("window").at("t_start").get<double>();
  r.t_end = meta.at("window").at("t_end").get<double>();
  r.max_balance_residual = meta.value("max_balance_residual", 0.0);
  for (const auto& s : meta.at("samples")) {
    FieldFile f = read_field_file(dir / s.at("file").get<std::string>());
    if (f.arrays.size() != 1) throw Error(ErrorCode::Parse, "snapshot file must hold one array");
    r.snapshots.push_back({s.at("time").get<double>(), s.at("step").get<long>(), std::move(f.arrays[0])});
  }
  return r;
}

}  // namespace pdl
