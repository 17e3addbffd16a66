#include "pdl/flow.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>

namespace pdl {

FlowField FlowField::zeros(int width, int height, double pixel_size) {
  return {width, height, pixel_size, Grid::Zero(height, width), Grid::Zero(height, width), Grid::Zero(height, width)};
}

FlowField FlowField::flipped_rows() const {
  FlowField out = zeros(width, height, pixel_size);
  for (int y = 0; y < height; ++y) {
    const int my = height - 1 - y;
    out.u.row(my) = u.row(y);
    out.p.row(my) = p.row(y);
    // Face between rows y-1 and y maps to the face between rows my and my+1.
    out.v.row(wrap(my + 1, height)) = -v.row(y);
  }
  return out;
}

FlowField FlowField::shifted(int dx, int dy) const {
  FlowField out = zeros(width, height, pixel_size);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int sy = wrap(y + dy, height);
      const int sx = wrap(x + dx, width);
      out.u(sy, sx) = u(y, x);
      out.v(sy, sx) = v(y, x);
      out.p(sy, sx) = p(y, x);
    }
  return out;
}

FlowField FlowField::scaled(double k) const {
  FlowField out = *this;
  out.u *= k;
  out.v *= k;
  out.p *= k;
  return out;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Unknown numbering over active faces and void cells.
struct Layout {
  GridT<int> u_id;
  GridT<int> v_id;
  GridT<int> p_id;
  int nu = 0;
  int nv = 0;
  int np = 0;

  int size() const { return nu + nv + np + 1; }
  int lagrange() const { return nu + nv + np; }

  explicit Layout(const PoreImage& image) {
    const int w = image.width();
    const int h = image.height();
    u_id = GridT<int>::Constant(h, w, -1);
    v_id = GridT<int>::Constant(h, w, -1);
    p_id = GridT<int>::Constant(h, w, -1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (image.is_void(x, y) && image.is_void_wrapped(x - 1, y)) u_id(y, x) = nu++;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (image.is_void(x, y) && image.is_void_wrapped(x, y - 1)) v_id(y, x) = nu + nv++;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (image.is_void(x, y)) p_id(y, x) = nu + nv + np++;
  }
};

struct System {
  SpMat matrix;
  Eigen::VectorXd rhs;
};

// Momentum rows are scaled by h^2/mu and pressure is carried as p*h/mu, so all
// viscous and pressure coefficients are O(1).
// Without `bordered` the mean-pressure multiplier is left out and the system is
// singular only in the pressure constant.
System assemble(const PoreImage& image, const Layout& L, const FluidProps& props, const FlowField* lagged,
                bool bordered = true) {
  const int w = image.width();
  const int h = image.height();
  const double hs = image.pixel_size();
  const double mu = props.viscosity;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(L.size()) * 9);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(L.size());

  // Row for one momentum component. `along` = +1 step along the component's own
  // axis, `across` = step in the other axis. Neighbours along the axis are wall
  // faces (value 0 at distance h); neighbours across use a ghost reflection.
  auto momentum_row = [&](const GridT<int>& ids, int x, int y, bool is_u) {
    const int row = ids(y, x);
    double diag = 0.0;
    auto id_at = [&](int xx, int yy) { return ids(wrap(yy, h), wrap(xx, w)); };
    const int ax = is_u ? 1 : 0;
    const int ay = is_u ? 0 : 1;
    for (const int s : {-1, 1}) {
      const int along = id_at(x + s * ax, y + s * ay);
      diag += 1.0;
      if (along >= 0) t.emplace_back(row, along, -1.0);
      const int across = id_at(x + s * ay, y + s * ax);
      if (across >= 0) {
        diag += 1.0;
        t.emplace_back(row, across, -1.0);
      } else {
        diag += 2.0;
      }
    }

    if (lagged) {
      // Upwinded convective fluxes with lagged advecting velocity, scaled by 1/mu.
      const Grid& U = lagged->u;
      const Grid& V = lagged->v;
      auto ug = [&](int xx, int yy) { return U(wrap(yy, h), wrap(xx, w)); };
      auto vg = [&](int xx, int yy) { return V(wrap(yy, h), wrap(xx, w)); };
      double fe, fw, fn, fs;
      if (is_u) {
        fe = 0.5 * (ug(x, y) + ug(x + 1, y));
        fw = 0.5 * (ug(x - 1, y) + ug(x, y));
        fn = 0.5 * (vg(x - 1, y + 1) + vg(x, y + 1));
        fs = 0.5 * (vg(x - 1, y) + vg(x, y));
      } else {
        fe = 0.5 * (ug(x + 1, y - 1) + ug(x + 1, y));
        fw = 0.5 * (ug(x, y - 1) + ug(x, y));
        fn = 0.5 * (vg(x, y) + vg(x, y + 1));
        fs = 0.5 * (vg(x, y - 1) + vg(x, y));
      }
      const double scale = props.density * hs / mu;
      fe *= scale;
      fw *= scale;
      fn *= scale;
      fs *= scale;
      diag += std::max(fe, 0.0) + std::max(-fw, 0.0) + std::max(fn, 0.0) + std::max(-fs, 0.0);
      const std::array<std::pair<int, double>, 4> upwind{{{id_at(x + 1, y), std::max(-fe, 0.0)},
                                                          {id_at(x - 1, y), std::max(fw, 0.0)},
                                                          {id_at(x, y + 1), std::max(-fn, 0.0)},
                                                          {id_at(x, y - 1), std::max(fs, 0.0)}}};
      for (const auto& [col, a] : upwind)
        if (col >= 0 && a != 0.0) t.emplace_back(row, col, -a);
    }
    t.emplace_back(row, row, diag);

    // Pressure difference across the face.
    const int p_here = L.p_id(y, x);
    const int p_back = is_u ? L.p_id(y, wrap(x - 1, w)) : L.p_id(wrap(y - 1, h), x);
    t.emplace_back(row, p_here, 1.0);
    t.emplace_back(row, p_back, -1.0);
    rhs(row) = hs * hs * (is_u ? props.body_force.x() : props.body_force.y()) / mu;
  };

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (L.u_id(y, x) >= 0) momentum_row(L.u_id, x, y, true);
      if (L.v_id(y, x) >= 0) momentum_row(L.v_id, x, y, false);
    }

  // Mass rows (negative divergence) bordered by the mean-pressure multiplier.
  const int lam = L.lagrange();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int row = L.p_id(y, x);
      if (row < 0) continue;
      if (const int id = L.u_id(y, x); id >= 0) t.emplace_back(row, id, 1.0);
      if (const int id = L.u_id(y, wrap(x + 1, w)); id >= 0) t.emplace_back(row, id, -1.0);
      if (const int id = L.v_id(y, x); id >= 0) t.emplace_back(row, id, 1.0);
      if (const int id = L.v_id(wrap(y + 1, h), x); id >= 0) t.emplace_back(row, id, -1.0);
      if (bordered) {
        t.emplace_back(row, lam, 1.0);
        t.emplace_back(lam, row, 1.0);
      }
    }

  const int n = bordered ? L.size() : L.size() - 1;
  if (!bordered) rhs.conservativeResize(n);
  SpMat A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return {std::move(A), std::move(rhs)};
}

Eigen::VectorXd solve_system(const System& sys, const FlowOptions& opts, FlowReport& report) {
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(sys.matrix);
  lu.factorize(sys.matrix);
  if (lu.info() != Eigen::Success) throw ConvergenceError("flow system factorization failed: " + lu.lastErrorMessage(), 1.0);

  const double bnorm = std::max(sys.rhs.norm(), std::numeric_limits<double>::min());
  Eigen::VectorXd x = lu.solve(sys.rhs);
  double rel = (sys.rhs - sys.matrix * x).norm() / bnorm;
  for (int k = 0; k < opts.max_refinement_steps && rel > 1e-3 * opts.tolerance; ++k) {
    const Eigen::VectorXd r = sys.rhs - sys.matrix * x;
    x += lu.solve(r);
    rel = (sys.rhs - sys.matrix * x).norm() / bnorm;
  }
  ++report.iterations;
  report.residual_history.push_back(rel);
  if (!std::isfinite(rel) || rel > opts.tolerance)
    throw ConvergenceError("flow residual " + std::to_string(rel) + " above tolerance", rel);
  return x;
}

// Stokes path: the symmetric saddle system is made quasi-definite with a small
// negative pressure shift, factorized by LDLT, and refined against the exact
// operator. Summing the shifted mass rows keeps the mean pressure at zero.
Eigen::VectorXd solve_symmetric(const System& sys, int pressure_begin, const FlowOptions& opts, FlowReport& report) {
  constexpr double shift = 1e-9;
  SpMat M = sys.matrix;
  for (int i = pressure_begin; i < M.rows(); ++i) M.coeffRef(i, i) -= shift;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt(M);
  if (ldlt.info() != Eigen::Success) throw ConvergenceError("flow system factorization failed", 1.0);

  const double bnorm = std::max(sys.rhs.norm(), std::numeric_limits<double>::min());
  Eigen::VectorXd x = ldlt.solve(sys.rhs);
  double rel = (sys.rhs - sys.matrix * x).norm() / bnorm;
  for (int k = 0; k < 8 * opts.max_refinement_steps && rel > 1e-3 * opts.tolerance; ++k) {
    x += ldlt.solve(Eigen::VectorXd(sys.rhs - sys.matrix * x));
    rel = (sys.rhs - sys.matrix * x).norm() / bnorm;
  }
  auto p = x.tail(x.size() - pressure_begin);
  p.array() -= p.mean();
  ++report.iterations;
  report.residual_history.push_back(rel);
  if (!std::isfinite(rel) || rel > opts.tolerance)
    throw ConvergenceError("flow residual " + std::to_string(rel) + " above tolerance", rel);
  return x;
}

FlowField unpack(const Eigen::VectorXd& x, const Layout& L, const PoreImage& image, const FluidProps& props) {
  const int w = image.width();
  const int h = image.height();
  FlowField f = FlowField::zeros(w, h, image.pixel_size());
  const double p_scale = props.viscosity / image.pixel_size();
  for (int y = 0; y < h; ++y)
    for (int x0 = 0; x0 < w; ++x0) {
      if (const int id = L.u_id(y, x0); id >= 0) f.u(y, x0) = x(id);
      if (const int id = L.v_id(y, x0); id >= 0) f.v(y, x0) = x(id);
      if (const int id = L.p_id(y, x0); id >= 0) f.p(y, x0) = x(id) * p_scale;
    }
  return f;
}

}  // namespace

FlowField solve_flow(const PoreImage& image, const FluidProps& props, const FlowOptions& opts, FlowReport* report) {
  if (!(props.density > 0.0) || !(props.viscosity > 0.0))
    throw Error(ErrorCode::InvalidArgument, "density and viscosity must be positive");
  if (image.void_count() == 0) throw Error(ErrorCode::DegenerateGeometry, "flow domain has no void cells");
  if (image.void_count() == static_cast<long>(image.cells().size()))
    throw Error(ErrorCode::NoDrag, "all-void periodic cell: constant body force has no stationary solution");

  FlowReport local;
  FlowReport& rep = report ? *report : local;
  rep = FlowReport{};

  const Layout layout(image);
  rep.unknowns = layout.size();
  if (props.body_force.squaredNorm() == 0.0) {
    rep.residual_history.push_back(0.0);
    return FlowField::zeros(image.width(), image.height(), image.pixel_size());
  }

  Eigen::VectorXd x = solve_symmetric(assemble(image, layout, props, nullptr, false), layout.nu + layout.nv, opts, rep);
  x.conservativeResize(layout.size());
  x(layout.lagrange()) = 0.0;
  if (opts.navier_stokes) {
    bool converged = false;
    double change = 0.0;
    for (int it = 0; it < opts.picard_max_iterations; ++it) {
      const FlowField lagged = unpack(x, layout, image, props);
      const Eigen::VectorXd next = solve_system(assemble(image, layout, props, &lagged), opts, rep);
      change = (next - x).norm() / std::max(next.norm(), std::numeric_limits<double>::min());
      x += opts.picard_damping * (next - x);
      rep.residual_history.push_back(change);
      if (change < opts.tolerance) {
        converged = true;
        break;
      }
    }
    if (!converged) throw ConvergenceError("Picard iteration did not converge", change);
  }

  FlowField field = unpack(x, layout, image, props);
  rep.max_divergence = relative_divergence(field, image);
  return field;
}

CenterVelocity interpolate_to_centers(const FlowField& field, const PoreImage& image) {
  const int w = field.width;
  const int h = field.height;
  CenterVelocity c{Grid::Zero(h, w), Grid::Zero(h, w)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!image.is_void(x, y)) continue;
      c.x(y, x) = 0.5 * (field.u(y, x) + field.u(y, wrap(x + 1, w)));
      c.y(y, x) = 0.5 * (field.v(y, x) + field.v(wrap(y + 1, h), x));
    }
  return c;
}

double relative_divergence(const FlowField& field, const PoreImage& image) {
  const int w = field.width;
  const int h = field.height;
  double speed_sum = 0.0;
  long faces = 0;
  double worst = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (image.is_void(x, y) && image.is_void_wrapped(x - 1, y)) {
        speed_sum += std::abs(field.u(y, x));
        ++faces;
      }
      if (image.is_void(x, y) && image.is_void_wrapped(x, y - 1)) {
        speed_sum += std::abs(field.v(y, x));
        ++faces;
      }
      if (!image.is_void(x, y)) continue;
      const double div = field.u(y, wrap(x + 1, w)) - field.u(y, x) + field.v(wrap(y + 1, h), x) - field.v(y, x);
      worst = std::max(worst, std::abs(div));
    }
  const double mean_speed = faces ? speed_sum / faces : 0.0;
  if (mean_speed == 0.0) return 0.0;
  return worst / mean_speed;
}

}  // namespace pdl
