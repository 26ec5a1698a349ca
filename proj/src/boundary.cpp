#include "bfront/boundary.hpp"

#include "bfront/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace bfront {

namespace {

constexpr double kGridRatio = 1.05;
constexpr int kGridPoints = 200;
constexpr double kStepScale = 0.05;  // rate * dy per RK4 step
constexpr double kEndpointTol = 1e-6;

using Residual = std::function<bool(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct NewtonResult {
  Eigen::VectorXd x;
  Eigen::VectorXd F;
  bool evaluated = false;
  bool ok = false;
};

// Gauss-Newton with forward-difference Jacobian and step halving. Works for
// square, under- and over-determined residuals.
NewtonResult gauss_newton(const Residual& fun, Eigen::VectorXd x, double tol, int max_iter) {
  NewtonResult out;
  Eigen::VectorXd F;
  if (!fun(x, F)) {
    out.x = x;
    return out;
  }
  const auto small = [&](const Eigen::VectorXd& r) {
    return r.size() == 0 || r.cwiseAbs().maxCoeff() <= tol;
  };
  for (int it = 0; it < max_iter && !small(F) && x.size() > 0; ++it) {
    Matrix J(F.size(), x.size());
    Eigen::VectorXd Fp;
    bool jac_ok = true;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double h = 1e-7 * (1.0 + std::abs(x[j]));
      Eigen::VectorXd xp = x;
      xp[j] += h;
      if (fun(xp, Fp) && Fp.size() == F.size()) {
        J.col(j) = (Fp - F) / h;
        continue;
      }
      xp[j] = x[j] - h;
      if (!fun(xp, Fp) || Fp.size() != F.size()) {
        jac_ok = false;
        break;
      }
      J.col(j) = (F - Fp) / h;
    }
    if (!jac_ok) break;
    const Eigen::VectorXd dx = -J.completeOrthogonalDecomposition().solve(F);
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd Fn;
    for (int halving = 0; halving < 30; ++halving, t *= 0.5) {
      if (fun(x + t * dx, Fn) && Fn.size() == F.size() && Fn.norm() < F.norm()) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    x += t * dx;
    F = Fn;
    if (t * dx.norm() <= 1e-15 * (1.0 + x.norm())) break;
  }
  out.x = x;
  out.F = F;
  out.evaluated = true;
  out.ok = small(F);
  return out;
}

bool safe_eval(const std::function<void()>& body) {
  try {
    body();
    return true;
  } catch (const Error&) {
    return false;
  }
}

struct Modes {
  Matrix basis;
  int stable = 0;
  int center_col = -1;
  double mu_slow = 0.0;
  double mu_fast = 0.0;
};

Modes select_modes(const Matrix& M, LayerMode mode) {
  const Eigen::Index p = M.rows();
  Modes out;
  out.basis = Matrix(p, 0);
  if (p == 0) return out;
  Eigen::EigenSolver<Matrix> es(M);
  const Eigen::VectorXcd mu = es.eigenvalues();
  Eigen::Index zero = 0;
  for (Eigen::Index i = 1; i < p; ++i)
    if (std::abs(mu[i].real()) < std::abs(mu[zero].real())) zero = i;
  const double margin = 1e-10;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (mode != LayerMode::Stable && i == zero) continue;
    if (std::abs(mu[i].real()) <= margin) {
      throw Error(ErrorKind::MarginalSpectrum,
                  "marginal spectrum: layer eigenvalue with real part " +
                      std::to_string(mu[i].real()));
    }
    if (mu[i].real() < 0) {
      if (out.stable == 0) {
        out.mu_slow = out.mu_fast = mu[i].real();
      } else {
        out.mu_slow = std::max(out.mu_slow, mu[i].real());
        out.mu_fast = std::min(out.mu_fast, mu[i].real());
      }
      ++out.stable;
    }
  }
  Matrix stable = leading_subspace(M, out.stable);
  if (mode != LayerMode::StableCenter) {
    out.basis = stable;
    return out;
  }
  if (std::abs(mu[zero].imag()) > margin) {
    throw Error(ErrorKind::MarginalSpectrum, "marginal spectrum: complex center pair");
  }
  out.basis = Matrix(p, stable.cols() + 1);
  out.basis.leftCols(stable.cols()) = stable;
  out.basis.col(stable.cols()) = es.eigenvectors().col(zero).real().normalized();
  out.center_col = static_cast<int>(stable.cols());
  return out;
}

std::vector<double> geometric_grid(double y_max, int count) {
  std::vector<double> ys(count);
  const double y1 = y_max * (kGridRatio - 1.0) / (std::pow(kGridRatio, kGridPoints - 1) - 1.0);
  for (int i = 0; i < count; ++i) ys[i] = y1 * (std::pow(kGridRatio, i) - 1.0) / (kGridRatio - 1.0);
  return ys;
}

}  // namespace

// ---------------------------------------------------------------------------

LinearTrace linear_boundary_trace(const LinearBoundaryProblem& prob) {
  const Eigen::Index n = prob.A.rows();
  if (prob.A.cols() != n || prob.D.rows() != n || prob.D.cols() != n || prob.v0.size() != n ||
      prob.vb.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "linear boundary problem: inconsistent dimensions");
  }
  const Matrix Dsym = 0.5 * (prob.D + prob.D.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> dsym(Dsym);
  if (dsym.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorKind::InvalidArgument, "linear boundary problem: D not positive definite");
  }
  const Matrix S = stable_subspace(prob.D.lu().solve(prob.A));

  Eigen::EigenSolver<Matrix> es(prob.A);
  std::vector<std::pair<double, Eigen::Index>> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(es.eigenvalues()[i].imag()) > 1e-12) {
      throw Error(ErrorKind::HyperbolicityViolated, "linear boundary problem: complex eigenvalue");
    }
    order.emplace_back(es.eigenvalues()[i].real(), i);
  }
  std::sort(order.begin(), order.end());
  std::vector<int> positive;
  for (int i = 0; i < n; ++i) {
    if (order[i].first == 0.0) {
      throw Error(ErrorKind::DegenerateTraceSystem, "degenerate trace system: A is singular");
    }
    if (order[i].first > 0) positive.push_back(i);
  }
  Matrix P(n, static_cast<Eigen::Index>(positive.size()));
  for (std::size_t j = 0; j < positive.size(); ++j) {
    P.col(j) = es.eigenvectors().col(order[positive[j]].second).real().normalized();
  }
  if (S.cols() + P.cols() != n) {
    throw Error(ErrorKind::DegenerateTraceSystem,
                "degenerate trace system: dim S + p = " + std::to_string(S.cols() + P.cols()) +
                    " != " + std::to_string(n));
  }
  Matrix K(n, n);
  K << S, P;
  Eigen::FullPivLU<Matrix> lu(K);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) {
    throw Error(ErrorKind::DegenerateTraceSystem, "degenerate trace system: S and positive span overlap");
  }
  const Eigen::VectorXd ab = lu.solve(prob.vb - prob.v0);
  const Eigen::VectorXd b = ab.tail(P.cols());

  LinearTrace out;
  out.trace = prob.v0 + P * b;
  out.fan.states.push_back(out.trace);
  State w = out.trace;
  for (std::size_t j = 0; j < positive.size(); ++j) {
    if (b[j] == 0.0) continue;
    Wave c;
    c.family = positive[j];
    c.kind = WaveKind::Contact;
    c.left = w;
    w = w - P.col(j) * b[j];
    c.right = w;
    c.speed = c.speed_right = order[positive[j]].first;
    c.strength = -b[j];
    out.fan.waves.push_back(c);
    out.fan.states.push_back(w);
  }
  if (!out.fan.waves.empty()) {
    out.fan.states.back() = prob.v0;
    out.fan.waves.back().right = prob.v0;
  }
  return out;
}

Eigen::VectorXd beta_tilde(const SystemDef& sys, const State& w0, const State& vb) {
  const int n = sys.dim;
  const int h = sys.hyperbolic_count;
  const int p = n - h;
  const State diff = w0 - vb;
  if (h == 0) return diff;

  const Matrix A11 = sys.characteristic_matrix(vb).topLeftCorner(h, h);
  Eigen::EigenSolver<Matrix> es(A11);
  std::vector<Eigen::Index> incoming;
  for (Eigen::Index i = 0; i < h; ++i) {
    const std::complex<double> mu = es.eigenvalues()[i];
    if (std::abs(mu.imag()) > 1e-12) {
      throw Error(ErrorKind::HyperbolicityViolated, "hyperbolicity violated: complex eigenvalue of the hyperbolic block at " + format_state(vb));
    }
    if (mu.real() > sys.tol_char) {
      incoming.push_back(i);
    }
  }
  // Identically vanishing speeds carry no condition; a speed that merely
  // crosses zero makes the incoming count ill-defined.
  const auto near_zero = [&](const Eigen::VectorXcd& mu) {
    int count = 0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) count += std::abs(mu[i].real()) <= sys.tol_char;
    return count;
  };
  const int zeros = near_zero(es.eigenvalues());
  if (zeros > 0) {
    for (const State& s : sys.ball_samples()) {
      if (near_zero(sys.characteristic_matrix(s).topLeftCorner(h, h).eigenvalues()) < zeros) {
        throw Error(ErrorKind::CharacteristicHyperbolicBlock,
                    "characteristic hyperbolic block at " + format_state(vb));
      }
    }
  }
  Eigen::VectorXd out(p + static_cast<Eigen::Index>(incoming.size()));
  out.head(p) = diff.tail(p);
  if (!incoming.empty()) {
    const Eigen::MatrixXcd L = es.eigenvectors().inverse();
    for (std::size_t j = 0; j < incoming.size(); ++j) {
      out[p + static_cast<Eigen::Index>(j)] = L.row(incoming[j]).real().dot(diff.head(h));
    }
  }
  return out;
}

Matrix layer_matrix(const SystemDef& sys, const State& v) {
  const int h = sys.hyperbolic_count;
  const int p = sys.dim - h;
  const Matrix A = sys.df(v);
  Matrix S = A.bottomRightCorner(p, p);
  if (h > 0) {
    Eigen::FullPivLU<Matrix> lu(A.topLeftCorner(h, h));
    if (!lu.isInvertible()) {
      throw Error(ErrorKind::DaeReductionFailed,
                  "DAE reduction failed: hyperbolic flux block singular at " + format_state(v));
    }
    S -= A.bottomLeftCorner(p, h) * lu.solve(A.topRightCorner(h, p));
  }
  return sys.D(v).bottomRightCorner(p, p).lu().solve(S);
}

LayerMode default_layer_mode(const SystemDef& sys, const State& limit) {
  const std::optional<int> k = classify_boundary_field(sys, limit);
  if (!k) return LayerMode::Stable;
  const double lam = eigen_structure(sys, limit).values[*k];
  if (std::abs(lam) > sys.tol_char) return LayerMode::Stable;
  return sys.kinds[*k] == FieldKind::GenuinelyNonlinear ? LayerMode::StableCenter
                                                        : LayerMode::StableSkipZero;
}

BoundaryLayerProfile BoundaryLayerProfile::constant(const State& v) {
  BoundaryLayerProfile out;
  out.y = geometric_grid(40.0, kGridPoints);
  out.w.assign(out.y.size(), v);
  out.limit = v;
  return out;
}

// ---------------------------------------------------------------------------

LayerShooter::LayerShooter(const SystemDef& sys, const State& limit, LayerMode mode,
                           const Matrix* reference_basis, double horizon)
    : sys_(&sys), limit_(limit), f_limit_(sys.f(limit)) {
  h_ = sys.hyperbolic_count;
  p_ = sys.dim - h_;
  const Matrix M = layer_matrix(sys, limit);
  Modes modes = select_modes(M, mode);
  basis_ = modes.basis;
  center_col_ = modes.center_col;
  const int d = static_cast<int>(basis_.cols());
  const int ns = modes.stable;

  if (reference_basis) {
    if (reference_basis->cols() != d) {
      throw Error(ErrorKind::InvalidArgument, "layer dimension changed along the iteration");
    }
    basis_.leftCols(ns) = align_basis(basis_.leftCols(ns), reference_basis->leftCols(ns));
    if (center_col_ >= 0 && basis_.col(center_col_).dot(reference_basis->col(center_col_)) < 0) {
      basis_.col(center_col_) *= -1.0;
    }
  } else if (center_col_ >= 0) {
    // Orient the center direction along the characteristic eigenvector, so
    // that a positive coordinate raises the boundary characteristic speed.
    const EigenDecomposition e = eigen_structure(sys, limit);
    Eigen::Index k = 0;
    e.values.cwiseAbs().minCoeff(&k);
    if (basis_.col(center_col_).dot(e.right.col(k).tail(p_)) < 0) basis_.col(center_col_) *= -1.0;
  }

  if (d > 0) {
    const Matrix BtB = basis_.transpose() * basis_;
    restricted_ = BtB.ldlt().solve(basis_.transpose() * M * basis_);
    projector_ = spectral_projector(M, basis_);
  } else {
    restricted_ = Matrix(0, 0);
    projector_ = Matrix::Zero(p_, p_);
  }
  if (horizon >= 0) {
    horizon_ = horizon;
  } else if (ns > 0) {
    horizon_ = std::min(std::log(1e6) / std::abs(modes.mu_slow), 12.0 / std::abs(modes.mu_fast));
  } else {
    horizon_ = 0.0;
  }
  y_max_ = ns > 0 ? 40.0 / std::abs(modes.mu_slow) : 40.0;
  rate_ = p_ > 0 ? M.eigenvalues().cwiseAbs().maxCoeff() : 0.0;
  if (p_ > 0) {
    const Matrix D0 = sys.D(limit);
    bool same = true;
    for (const State& s : sys.ball_samples()) same = same && sys.D(s) == D0;
    if (same) constant_D_.emplace(D0.bottomRightCorner(p_, p_));
  }
}

State LayerShooter::complete(const State& z, State& guess) const {
  State w(sys_->dim);
  w.head(h_) = guess.head(h_);
  w.tail(p_) = z;
  if (h_ > 0) {
    const State target = f_limit_.head(h_);
    bool done = false;
    for (int it = 0; it < 40 && !done; ++it) {
      const State r = sys_->f(w).head(h_) - target;
      if (r.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + target.norm())) break;
      Eigen::FullPivLU<Matrix> lu(sys_->df(w).topLeftCorner(h_, h_));
      if (!lu.isInvertible()) {
        throw Error(ErrorKind::DaeReductionFailed,
                    "DAE reduction failed: singular hyperbolic block at " + format_state(w));
      }
      const State dw = lu.solve(-r);
      w.head(h_) += dw;
      done = dw.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + w.norm());
      if (it == 39) {
        throw Error(ErrorKind::DaeReductionFailed,
                    "DAE reduction failed: algebraic constraint unsolved near " + format_state(w));
      }
    }
  }
  if (!sys_->in_ball(w)) {
    throw Error(ErrorKind::SmallDataViolated, "small-data regime violated: layer leaves the ball at " + format_state(w));
  }
  guess = w;
  return w;
}

State LayerShooter::rhs(const State& z, State& guess) const {
  const State w = complete(z, guess);
  const State df = (sys_->f(w) - f_limit_).tail(p_);
  if (constant_D_) return constant_D_->solve(df);
  return sys_->D(w).bottomRightCorner(p_, p_).lu().solve(df);
}

double LayerShooter::local_rate(const State& z, State guess) const {
  const State f0 = rhs(z, guess);
  double rate = 0.0;
  Matrix J(p_, p_);
  for (int j = 0; j < p_; ++j) {
    const double h = 1e-7 * (1.0 + std::abs(z[j]));
    State zp = z;
    zp[j] += h;
    J.col(j) = (rhs(zp, guess) - f0) / h;
  }
  rate = J.cwiseAbs().rowwise().sum().maxCoeff();
  return rate;
}

State LayerShooter::integrate(State z, double dy, State& guess, int refine) const {
  if (dy == 0.0) return z;
  const double rate = std::max(rate_, local_rate(z, guess));
  const int steps = refine * std::max(1, static_cast<int>(std::ceil(std::abs(dy) * rate / kStepScale)));
  const double h = dy / steps;
  for (int i = 0; i < steps; ++i) {
    const State k1 = rhs(z, guess);
    const State k2 = rhs(z + 0.5 * h * k1, guess);
    const State k3 = rhs(z + 0.5 * h * k2, guess);
    const State k4 = rhs(z + h * k3, guess);
    z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return z;
}

std::vector<double> LayerShooter::grid(int count) const { return geometric_grid(y_max_, count); }

State LayerShooter::sweep_back(const Eigen::VectorXd& c, const std::vector<double>& ys,
                               std::vector<State>* samples) const {
  State guess = limit_;
  State z = limit_.tail(p_);
  if (basis_.cols() > 0) z += basis_ * (matrix_exp(restricted_ * horizon_) * c);
  int last = 0;
  while (last + 1 < static_cast<int>(ys.size()) && ys[last + 1] <= horizon_) ++last;
  double y = horizon_;
  for (int i = last; i >= 0; --i) {
    z = integrate(z, ys[i] - y, guess);
    y = ys[i];
    if (samples) (*samples)[i] = complete(z, guess);
  }
  return complete(z, guess);
}

State LayerShooter::shoot(const Eigen::VectorXd& c) const {
  return sweep_back(c, grid(kGridPoints), nullptr);
}

std::optional<BoundaryLayerProfile> LayerShooter::profile(const Eigen::VectorXd& c,
                                                          const State& vb) const {
  try {
    BoundaryLayerProfile out;
    out.limit = limit_;
    out.y = grid(kGridPoints);
    out.w.resize(out.y.size());
    sweep_back(c, out.y, &out.w);
    int last = 0;
    while (last + 1 < static_cast<int>(out.y.size()) && out.y[last + 1] <= horizon_) ++last;

    // Forward tail, projected back onto the selected subspace each interval
    // so that excluded directions cannot grow.
    State guess = out.w[last];
    State z = out.w[last].tail(p_);
    const State zl = limit_.tail(p_);
    const int cap = 4000;
    for (int i = last + 1;; ++i) {
      if (i >= static_cast<int>(out.y.size())) {
        const double err = (out.w.back() - limit_).cwiseAbs().maxCoeff();
        if (err <= kEndpointTol || static_cast<int>(out.y.size()) >= cap) break;
        out.y.push_back(out.y.back() * kGridRatio + out.y[1]);
        out.w.emplace_back();
      }
      z = zl + projector_ * (z - zl);
      z = integrate(z, out.y[i] - out.y[i - 1], guess);
      out.w[i] = complete(z, guess);
    }

    double defect = 0.0;
    for (std::size_t i = 0; i + 1 < out.y.size(); ++i) {
      State g = out.w[i];
      const State zf = integrate(out.w[i].tail(p_), out.y[i + 1] - out.y[i], g, 2);
      defect = std::max(defect, (zf - out.w[i + 1].tail(p_)).cwiseAbs().maxCoeff());
    }
    for (const State& w : out.w) {
      if (h_ > 0) defect = std::max(defect, (sys_->f(w) - f_limit_).head(h_).cwiseAbs().maxCoeff());
    }
    out.layer_residual = defect;
    out.endpoint_residual = (out.w.back() - limit_).cwiseAbs().maxCoeff();
    out.beta_residual = max_norm(beta_tilde(*sys_, out.w.front(), vb));
    out.xi = center_col_ >= 0 ? c[center_col_] : 0.0;
    if (out.endpoint_residual > kEndpointTol) return std::nullopt;
    return out;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DaeReductionFailed) throw;
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------

std::optional<BoundaryLayerProfile> solve_boundary_layer(const SystemDef& sys, const State& limit,
                                                         const State& vb,
                                                         const LayerOptions& opts) {
  sys.require_in_ball(limit, "boundary layer");
  if ((limit - vb).cwiseAbs().maxCoeff() == 0.0) return BoundaryLayerProfile::constant(limit);
  const LayerShooter shooter(sys, limit, default_layer_mode(sys, limit));
  const int p = sys.dim - sys.hyperbolic_count;
  Eigen::VectorXd c0 = Eigen::VectorXd::Zero(shooter.dim());
  if (shooter.dim() > 0) {
    c0 = shooter.basis().colPivHouseholderQr().solve(State((vb - limit).tail(p)));
  }
  const NewtonResult r = gauss_newton(
      [&](const Eigen::VectorXd& c, Eigen::VectorXd& F) {
        return safe_eval([&] { F = beta_tilde(sys, shooter.shoot(c), vb); });
      },
      c0, 1e-2 * opts.tol, opts.max_iter);
  if (!r.evaluated || (r.F.size() > 0 && r.F.cwiseAbs().maxCoeff() > opts.tol)) return std::nullopt;
  auto prof = shooter.profile(r.x, vb);
  if (!prof || prof->beta_residual > opts.tol) return std::nullopt;
  return prof;
}

EquivWitness check_equiv_D(const SystemDef& sys, const State& trace, const State& vb,
                           const LayerOptions& opts) {
  EquivWitness out;
  out.sub_trace = trace;
  const std::optional<int> k = classify_boundary_field(sys, trace);

  const auto direct = [&] {
    out.profile = solve_boundary_layer(sys, trace, vb, opts);
    out.holds = out.profile.has_value();
    return out;
  };
  if (!k) return direct();

  if (sys.kinds[*k] == FieldKind::GenuinelyNonlinear) {
    // 0-speed Lax shock with the trace on the right: needs lambda_k(trace) < 0.
    // Tried first: in the scalar case the direct layer to the trace only
    // exists in the limit where it degenerates into this shock.
    const double lam = eigen_structure(sys, trace).values[*k];
    if (lam >= -sys.tol_char) return direct();
    WaveCurveOptions wide;
    wide.s_max = 1e300;
    double s0 = -2.0 * lam, s1 = -2.2 * lam;
    double g0 = 0, g1 = 0;
    HugoniotPoint hp;
    bool found = safe_eval([&] {
      g0 = hugoniot_point(sys, trace, *k, s0, wide).speed;
      for (int it = 0; it < 60; ++it) {
        hp = hugoniot_point(sys, trace, *k, s1, wide);
        g1 = hp.speed;
        if (std::abs(g1) <= 1e-14 || g1 == g0) break;
        const double s2 = s1 - g1 * (s1 - s0) / (g1 - g0);
        s0 = s1;
        g0 = g1;
        s1 = s2;
      }
    });
    if (!found || std::abs(hp.speed) > 1e-12) return direct();
    const State partner = hp.state;
    if (eigen_structure(sys, partner).values[*k] < 0) return direct();
    out.profile = solve_boundary_layer(sys, partner, vb, opts);
    if (!out.profile) return direct();
    Wave shock;
    shock.family = *k;
    shock.kind = WaveKind::Shock;
    shock.left = partner;
    shock.right = trace;
    shock.strength = eigen_structure(sys, partner).left.row(*k).dot(trace - partner);
    out.boundary_wave = shock;
    out.sub_trace = partner;
    out.holds = true;
    return out;
  }

  // Linearly degenerate boundary field: the sub-trace slides along the
  // contact curve through the trace.
  const int kk = *k;
  const LayerShooter ref(sys, trace, LayerMode::StableSkipZero);
  const Matrix B0 = ref.basis();
  const double T0 = ref.horizon();
  const int d = ref.dim();
  const int p = sys.dim - sys.hyperbolic_count;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(d + 1);
  if (d > 0) x0.head(d) = B0.colPivHouseholderQr().solve(State((vb - trace).tail(p)));
  const NewtonResult r = gauss_newton(
      [&](const Eigen::VectorXd& x, Eigen::VectorXd& F) {
        return safe_eval([&] {
          const State low = integral_curve(sys, trace, kk, -x[d]);
          const LayerShooter sh(sys, low, LayerMode::StableSkipZero, &B0, T0);
          F = beta_tilde(sys, sh.shoot(x.head(d)), vb);
        });
      },
      x0, 1e-2 * opts.tol, opts.max_iter);
  if (!r.evaluated || (r.F.size() > 0 && r.F.cwiseAbs().maxCoeff() > opts.tol)) return out;
  const State low = integral_curve(sys, trace, kk, -r.x[d]);
  const LayerShooter sh(sys, low, LayerMode::StableSkipZero, &B0, T0);
  out.profile = sh.profile(r.x.head(d), vb);
  if (!out.profile) return out;
  out.profile->xi = r.x[d];
  Wave contact;
  contact.family = kk;
  contact.kind = WaveKind::Contact;
  contact.left = low;
  contact.right = trace;
  contact.speed = contact.speed_right = eigen_structure(sys, low).values[kk];
  contact.strength = r.x[d];
  out.boundary_wave = contact;
  out.sub_trace = low;
  out.holds = true;
  return out;
}

State star_trace(const SystemDef& sys, const State& interior, const State& vb,
                 const RiemannOptions& opts) {
  const RiemannFan fan = solve_riemann(sys, vb, interior, opts);
  return sample_fan(sys, fan, 0.0, opts.curve);
}

bool check_equiv_star(const SystemDef& sys, const State& trace, const State& vb,
                      const RiemannOptions& opts) {
  const RiemannFan fan = solve_riemann(sys, vb, trace, opts);
  for (const Wave& w : fan.waves) {
    if (std::max(w.speed, w.speed_right) > 1e-12) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

const char* to_string(BoundaryBranch branch) {
  switch (branch) {
    case BoundaryBranch::Trivial: return "trivial";
    case BoundaryBranch::NonCharacteristic: return "non-characteristic";
    case BoundaryBranch::StableCharacteristic: return "stable-characteristic";
    case BoundaryBranch::OutgoingCharacteristic: return "outgoing-characteristic";
    case BoundaryBranch::Center: return "center";
    case BoundaryBranch::ZeroSpeedShock: return "zero-speed-shock";
    case BoundaryBranch::ZeroSpeedContact: return "zero-speed-contact";
  }
  return "?";
}

namespace {

struct Formulation {
  BoundaryBranch branch;
  LayerMode mode;
  std::vector<int> out;  // outgoing families, increasing
  bool extra_unknown = false;
  bool extra_equation = false;
};

struct Candidate {
  State sub_trace;
  State trace;
  Eigen::VectorXd c;
  double extra = 0.0;
  Eigen::VectorXd s;
};

}  // namespace

BoundaryFan solve_boundary_riemann(const SystemDef& sys, const State& interior, const State& vb,
                                   const BoundaryOptions& opts) {
  sys.require_in_ball(interior, "boundary Riemann problem");
  sys.require_in_ball(vb, "boundary Riemann problem");
  const int n = sys.dim;
  const std::optional<int> kopt = classify_boundary_field(sys, interior);
  const int k = kopt ? *kopt : -1;

  if ((interior - vb).cwiseAbs().maxCoeff() == 0.0) {
    BoundaryFan fan;
    fan.branch = BoundaryBranch::Trivial;
    fan.boundary_family = k;
    fan.trace = fan.sub_trace = interior;
    fan.layer = BoundaryLayerProfile::constant(interior);
    return fan;
  }

  const EigenDecomposition e_in = eigen_structure(sys, interior);
  std::vector<int> out_base;
  for (int j = 0; j < n; ++j)
    if (j != k && e_in.values[j] > 0) out_base.push_back(j);
  std::vector<int> out_k = out_base;
  if (k >= 0) {
    out_k.push_back(k);
    std::sort(out_k.begin(), out_k.end());
  }

  std::vector<Formulation> forms;
  if (k < 0) {
    forms.push_back({BoundaryBranch::NonCharacteristic, LayerMode::Stable, out_base});
  } else if (sys.kinds[k] == FieldKind::LinearlyDegenerate) {
    forms.push_back({BoundaryBranch::ZeroSpeedContact, LayerMode::StableSkipZero, out_base, true, false});
  } else {
    const Formulation S{BoundaryBranch::StableCharacteristic, LayerMode::Stable, out_base};
    const Formulation P{BoundaryBranch::OutgoingCharacteristic, LayerMode::Stable, out_k};
    const Formulation C{BoundaryBranch::Center, LayerMode::StableCenter, out_k, false, true};
    const Formulation Z{BoundaryBranch::ZeroSpeedShock, LayerMode::Stable, out_base, true, true};
    const double lb = eigen_structure(sys, vb).values[k];
    const double li = e_in.values[k];
    if (li < 0 && lb < -li) forms = {S, P, C, Z};
    else if (lb > 0) forms = {P, Z, S, C};
    else forms = {C, P, S, Z};
  }

  std::string failures;

  for (const State& start : {vb, interior}) {
    for (const Formulation& form : forms) {
      const int q = static_cast<int>(form.out.size());
      const int e = form.extra_unknown ? 1 : 0;
      std::optional<LayerShooter> ref;
      if (!safe_eval([&] { ref.emplace(sys, start, form.mode); })) continue;
      const Matrix B0 = ref->basis();
      const double T0 = ref->horizon();
      const int d = ref->dim();

      Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n + d + e + q);
      x0.head(n) = start;
      if (form.branch == BoundaryBranch::ZeroSpeedShock) {
        const double lam = eigen_structure(sys, start).values[k];
        if (lam <= 0) continue;
        x0[n + d] = -2.0 * lam;
      }

      // Unpacks x into the structure; returns false outside the regime.
      auto build = [&](const Eigen::VectorXd& x, Candidate& cand, Eigen::VectorXd* F,
                       std::optional<LayerShooter>* shooter_out) {
        return safe_eval([&] {
          cand.sub_trace = x.head(n);
          cand.c = x.segment(n, d);
          cand.extra = e ? x[n + d] : 0.0;
          cand.s = x.tail(q);
          const LayerShooter sh(sys, cand.sub_trace, form.mode, &B0, T0);
          double extra_eq = 0.0;
          switch (form.branch) {
            case BoundaryBranch::ZeroSpeedShock: {
              const HugoniotPoint hp = hugoniot_point(sys, cand.sub_trace, k, cand.extra, opts.riemann.curve);
              cand.trace = hp.state;
              extra_eq = hp.speed;
              break;
            }
            case BoundaryBranch::ZeroSpeedContact:
              cand.trace = integral_curve(sys, cand.sub_trace, k, cand.extra, opts.riemann.curve);
              break;
            case BoundaryBranch::Center:
              cand.trace = cand.sub_trace;
              extra_eq = eigen_structure(sys, cand.sub_trace).values[k];
              break;
            default:
              cand.trace = cand.sub_trace;
          }
          if (F) {
            State end = cand.trace;
            for (int i = 0; i < q; ++i) end = wave_curve(sys, end, form.out[i], cand.s[i], opts.riemann.curve);
            const Eigen::VectorXd beta = beta_tilde(sys, sh.shoot(cand.c), vb);
            F->resize(beta.size() + n + (form.extra_equation ? 1 : 0));
            F->head(beta.size()) = beta;
            F->segment(beta.size(), n) = end - interior;
            if (form.extra_equation) (*F)[beta.size() + n] = extra_eq;
          }
          if (shooter_out) shooter_out->emplace(sh);
        });
      };

      const NewtonResult r = gauss_newton(
          [&](const Eigen::VectorXd& x, Eigen::VectorXd& F) {
            Candidate cand;
            return build(x, cand, &F, nullptr);
          },
          x0, opts.tol, opts.max_iter);
      if (!r.ok) {
        failures += std::string(" ") + to_string(form.branch);
        continue;
      }

      Candidate cand;
      std::optional<LayerShooter> sh;
      if (!build(r.x, cand, nullptr, &sh)) continue;

      // Admissibility of the branch.
      const double lam_low = eigen_structure(sys, cand.sub_trace).values[std::max(k, 0)];
      const double lam_trace = eigen_structure(sys, cand.trace).values[std::max(k, 0)];
      bool valid = true;
      BoundaryFan fan;
      fan.branch = form.branch;
      fan.boundary_family = k;
      fan.trace = cand.trace;
      fan.sub_trace = cand.sub_trace;
      State w = cand.trace;
      for (int i = 0; i < q && valid; ++i) {
        if (std::abs(cand.s[i]) <= 1e-12) {
          if (form.out[i] == k && form.branch == BoundaryBranch::OutgoingCharacteristic &&
              lam_trace <= 0) {
            valid = false;
          }
          continue;
        }
        Wave wave;
        if (!safe_eval([&] { wave = make_wave(sys, w, form.out[i], cand.s[i], opts.riemann.curve); })) {
          valid = false;
          break;
        }
        const bool center_fan = form.branch == BoundaryBranch::Center && form.out[i] == k &&
                                wave.kind == WaveKind::Rarefaction;
        if (center_fan ? wave.speed < -1e-9 : wave.speed <= 0) valid = false;
        w = wave.right;
        fan.waves.push_back(wave);
      }
      if (!fan.waves.empty()) {
        fan.waves.back().right = interior;
      } else {
        // Only roundoff separates the trace from the interior state.
        fan.trace = interior;
        if (fan.sub_trace == cand.trace) fan.sub_trace = interior;
      }
      switch (form.branch) {
        case BoundaryBranch::StableCharacteristic:
          valid = valid && lam_low < 0;
          break;
        case BoundaryBranch::OutgoingCharacteristic:
          valid = valid && lam_low > 0;
          break;
        case BoundaryBranch::Center:
          for (int i = 0; i < q; ++i)
            if (form.out[i] == k && cand.s[i] < -1e-12) valid = false;
          fan.xi = sh->center_col() >= 0 ? cand.c[sh->center_col()] : 0.0;
          break;
        case BoundaryBranch::ZeroSpeedShock: {
          valid = valid && cand.extra < 0 && lam_low >= -1e-12 && lam_trace <= 1e-12;
          Wave shock;
          shock.family = k;
          shock.kind = WaveKind::Shock;
          shock.left = cand.sub_trace;
          shock.right = fan.trace;
          shock.strength = cand.extra;
          fan.boundary_wave = shock;
          fan.xi = cand.extra;
          break;
        }
        case BoundaryBranch::ZeroSpeedContact: {
          Wave contact;
          contact.family = k;
          contact.kind = WaveKind::Contact;
          contact.left = cand.sub_trace;
          contact.right = fan.trace;
          contact.speed = contact.speed_right = lam_low;
          contact.strength = cand.extra;
          if (cand.extra != 0.0) fan.boundary_wave = contact;
          fan.xi = cand.extra;
          break;
        }
        default:
          break;
      }
      if (!valid) {
        failures += std::string(" ") + to_string(form.branch) + "(inadmissible)";
        continue;
      }
      auto prof = sh->profile(cand.c, vb);
      if (!prof) {
        failures += std::string(" ") + to_string(form.branch) + "(no layer)";
        continue;
      }
      fan.layer = std::move(*prof);
      if (form.branch == BoundaryBranch::Center) fan.layer.xi = fan.xi;
      return fan;
    }
  }
  throw Error(ErrorKind::BoundaryRiemannFailed,
              "boundary Riemann solver failed for interior " + format_state(interior) +
                  ", boundary datum " + format_state(vb) + ":" + failures);
}

}  // namespace bfront
