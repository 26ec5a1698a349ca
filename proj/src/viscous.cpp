#include "bfront/viscous.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bfront {

namespace {

double operator_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(M).singularValues()[0];
}

State invert_conserved(const SystemDef& sys, const State& u, State v) {
  for (int it = 0; it < 30; ++it) {
    const State r = sys.g(v) - u;
    if (max_norm(r) <= 1e-14 * (1.0 + max_norm(u))) return v;
    v -= sys.dg(v).partialPivLu().solve(r);
  }
  return v;
}

// Boundary node: parabolic components and incoming hyperbolic
// characteristics from the datum, outgoing ones from the half-cell update.
State impose_boundary(const SystemDef& sys, const State& provisional, const State& vb) {
  const int h = sys.hyperbolic_count;
  if (h == 0) return vb;
  const int p = sys.dim - h;
  State out = provisional;
  out.tail(p) = vb.tail(p);
  const Matrix A11 = sys.characteristic_matrix(vb).topLeftCorner(h, h);
  Eigen::EigenSolver<Matrix> es(A11);
  const Matrix R = es.eigenvectors().real();
  const Matrix L = R.inverse();
  for (int i = 0; i < h; ++i) {
    if (es.eigenvalues()[i].real() > sys.tol_char) {
      const double a = L.row(i).dot(vb.head(h) - provisional.head(h));
      out.head(h) += a * R.col(i);
    }
  }
  return out;
}

}  // namespace

State ViscousGrid::interior_mass() const {
  State m = State::Zero(v.rows());
  for (int i = 1; i + 1 < nodes(); ++i) m += sys->g(v.col(i));
  return m * dx;
}

ViscousGrid make_grid(const SystemDef& sys, const Datum& v0, const Datum& vb, double eps,
                      const ViscousOptions& opts) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  if (!(opts.length > 0.0)) throw Error(ErrorKind::InvalidArgument, "domain length must be positive");
  ViscousGrid g;
  g.sys = &sys;
  g.eps = eps;
  g.boundary = opts.boundary;
  g.dx = opts.dx > 0 ? opts.dx : 2e-4 * opts.length;
  g.x0 = opts.boundary ? 0.0 : -opts.length;
  const double span = opts.boundary ? opts.length : 2.0 * opts.length;
  const int nodes = static_cast<int>(std::lround(span / g.dx)) + 1;
  if (nodes < 3) throw Error(ErrorKind::InvalidArgument, "grid needs at least 3 nodes");
  g.vb = vb;
  g.v.resize(sys.dim, nodes);
  for (int i = 0; i < nodes; ++i) {
    const State s = v0(g.x(i));
    sys.require_in_ball(s, "viscous initial datum");
    g.v.col(i) = s;
  }
  if (g.boundary) g.v.col(0) = impose_boundary(sys, g.v.col(0), vb(0.0));

  double d_norm = 0.0;
  double d_min = std::numeric_limits<double>::infinity();
  const int h = sys.hyperbolic_count;
  for (const State& s : sys.ball_samples()) {
    const Matrix D = sys.D(s);
    d_norm = std::max(d_norm, operator_norm(D));
    const Matrix D22 = D.bottomRightCorner(sys.dim - h, sys.dim - h);
    const Matrix sym = 0.5 * (D22 + D22.transpose());
    if (sym.size() > 0) {
      d_min = std::min(d_min, Eigen::SelfAdjointEigenSolver<Matrix>(sym).eigenvalues().minCoeff());
    }
  }
  const double lam = std::max(sys.max_speed, 1e-12);
  const double diffusive = d_norm > 0 ? g.dx * g.dx / (2.0 * eps * d_norm) : lam;
  g.dt = opts.safety * std::min(g.dx / lam, diffusive);
  // Central flux where the physical viscosity already controls the cell
  // Peclet number; Rusanov dissipation otherwise.
  bool same = true;
  const Matrix D0 = sys.D(sys.reference);
  for (const State& s : sys.ball_samples()) same = same && sys.D(s) == D0;
  if (same) g.constant_D = D0;
  g.alpha = h > 0 ? lam : std::max(0.0, lam - 2.0 * eps * d_min / g.dx);
  return g;
}

StepFluxes viscous_step(ViscousGrid& grid) {
  const SystemDef& sys = *grid.sys;
  const int n = grid.nodes();
  const int dim = sys.dim;
  const double dt = grid.dt;
  const double dx = grid.dx;
  const double eps = grid.eps;

  Matrix& f = grid.scratch_f;
  Matrix& face = grid.scratch_face;
  f.resize(dim, n);
  face.resize(dim, n - 1);
  for (int i = 0; i < n; ++i) f.col(i) = sys.f(grid.v.col(i));
  const bool constant_D = grid.constant_D.size() > 0;
  if (!constant_D) {
    grid.scratch_D.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) grid.scratch_D[i] = sys.D(grid.v.col(i));
  }
  // face(i) sits between nodes i and i+1: total outgoing flux.
  State dv(dim), Ddv(dim), tmp(dim);
  const double k = eps / dx;
  for (int i = 0; i + 1 < n; ++i) {
    dv = grid.v.col(i + 1) - grid.v.col(i);
    if (constant_D) {
      Ddv.noalias() = grid.constant_D * dv;
    } else {
      Ddv.noalias() = grid.scratch_D[i] * dv;
      tmp.noalias() = grid.scratch_D[i + 1] * dv;
      Ddv = 0.5 * (Ddv + tmp);
    }
    face.col(i) = 0.5 * (f.col(i) + f.col(i + 1)) - (0.5 * grid.alpha) * dv - k * Ddv;
  }

  Matrix& next = grid.scratch_next;
  next = grid.v;
  const bool conserved = static_cast<bool>(sys.conserved);
  const double r = dt / dx;
  for (int i = 1; i + 1 < n; ++i) {
    if (conserved) {
      const State du = -r * (face.col(i) - face.col(i - 1));
      next.col(i) = invert_conserved(sys, State(sys.g(grid.v.col(i)) + du), grid.v.col(i));
    } else {
      next.col(i) -= r * (face.col(i) - face.col(i - 1));
    }
  }
  const double t_new = grid.t + dt;
  if (grid.boundary) {
    // Half cell [0, dx/2] with the physical flux at x = 0.
    const State du = -2.0 * dt / dx * (face.col(0) - f.col(0));
    State provisional = conserved
        ? invert_conserved(sys, State(sys.g(grid.v.col(0)) + du), grid.v.col(0))
        : State(grid.v.col(0) + du);
    next.col(0) = impose_boundary(sys, provisional, grid.vb(t_new));
  } else {
    next.col(0) = next.col(1);
  }
  next.col(n - 1) = next.col(n - 2);

  for (int i = 0; i < n; ++i) {
    const double dist = (next.col(i) - sys.reference).norm();
    if (!(dist <= sys.radius)) {
      throw Error(ErrorKind::ViscousOutOfRegime,
                  "viscous solver out of regime at x = " + std::to_string(grid.x(i)) +
                      ", t = " + std::to_string(t_new) + ": " + format_state(next.col(i)));
    }
  }
  StepFluxes out{dt * face.col(0), dt * face.col(n - 2)};
  grid.v.swap(next);
  grid.t = t_new;
  return out;
}

State window_average(const ViscousGrid& grid, double lo, double hi) {
  State sum = State::Zero(grid.v.rows());
  int count = 0;
  for (int i = 0; i < grid.nodes(); ++i) {
    const double x = grid.x(i);
    if (x >= lo - 1e-12 && x <= hi + 1e-12) {
      sum += grid.v.col(i);
      ++count;
    }
  }
  if (count == 0) {
    // Window narrower than a cell: nearest node to its center.
    const int i = std::clamp(static_cast<int>(std::lround((0.5 * (lo + hi) - grid.x0) / grid.dx)), 0,
                             grid.nodes() - 1);
    return grid.v.col(i);
  }
  return sum / count;
}

ViscousResult viscous_solve(const SystemDef& sys, const Datum& v0, const Datum& vb, double eps,
                            double t_end, std::vector<double> sample_times,
                            const ViscousOptions& opts) {
  if (!(t_end >= 0.0)) throw Error(ErrorKind::InvalidArgument, "t_end must be nonnegative");
  std::sort(sample_times.begin(), sample_times.end());
  sample_times.erase(std::remove_if(sample_times.begin(), sample_times.end(),
                                    [&](double t) { return t < 0.0 || t > t_end; }),
                     sample_times.end());
  if (sample_times.empty() || sample_times.back() < t_end) sample_times.push_back(t_end);

  ViscousGrid grid = make_grid(sys, v0, vb, eps, opts);
  ViscousResult result;
  result.dt = grid.dt;
  result.dx = grid.dx;
  const double full_dt = grid.dt;
  for (const double ts : sample_times) {
    while (grid.t < ts - 1e-14 * (1.0 + ts)) {
      grid.dt = std::min(full_dt, ts - grid.t);
      viscous_step(grid);
      ++result.steps;
    }
    grid.dt = full_dt;
    ViscousSample s;
    s.t = ts;
    s.x.reserve(static_cast<std::size_t>(grid.nodes()));
    for (int i = 0; i < grid.nodes(); ++i) {
      s.x.push_back(grid.x(i));
      s.v.push_back(grid.v.col(i));
    }
    if (grid.boundary) s.trace = window_average(grid, opts.trace_k * eps, 2.0 * opts.trace_k * eps);
    result.samples.push_back(std::move(s));
  }
  return result;
}

}  // namespace bfront
