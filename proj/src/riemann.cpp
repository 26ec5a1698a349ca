#include "bfront/riemann.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bfront {

const char* to_string(WaveKind kind) {
  switch (kind) {
    case WaveKind::Shock: return "shock";
    case WaveKind::Contact: return "contact";
    case WaveKind::Rarefaction: return "rarefaction";
    case WaveKind::NonPhysical: return "non-physical";
  }
  return "?";
}

namespace {

void check_strength(const SystemDef& sys, double s, const WaveCurveOptions& opts) {
  const double s_max = opts.s_max > 0 ? opts.s_max : sys.s_max;
  if (!(std::abs(s) <= s_max)) {
    throw Error(ErrorKind::SmallDataViolated,
                "small-data regime violated: |s| = " + std::to_string(std::abs(s)) +
                    " exceeds s_max = " + std::to_string(s_max));
  }
}

State right_eigenvector(const SystemDef& sys, const State& v, int k) {
  sys.require_in_ball(v, "wave curve");
  return eigen_structure(sys, v).right.col(k);
}

}  // namespace

State integral_curve(const SystemDef& sys, const State& v0, int k, double s,
                     const WaveCurveOptions& opts) {
  if (s == 0.0) return v0;
  const int steps = std::max(1, opts.rk_steps);
  const double h = s / steps;
  State w = v0;
  for (int i = 0; i < steps; ++i) {
    const State k1 = right_eigenvector(sys, w, k);
    const State k2 = right_eigenvector(sys, w + 0.5 * h * k1, k);
    const State k3 = right_eigenvector(sys, w + 0.5 * h * k2, k);
    const State k4 = right_eigenvector(sys, w + h * k3, k);
    w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  sys.require_in_ball(w, "wave curve");
  return w;
}

HugoniotPoint hugoniot_point(const SystemDef& sys, const State& v0, int k, double s,
                             const WaveCurveOptions&) {
  const int n = sys.dim;
  const EigenDecomposition e0 = eigen_structure(sys, v0);
  const State l = e0.left.row(k).transpose();
  const State g0 = sys.g(v0);
  const State f0 = sys.f(v0);
  if (s == 0.0) return {v0, e0.values[k]};

  const int substeps = std::max(1, static_cast<int>(std::ceil(std::abs(s) / 0.05)));
  State v = v0;
  double sigma = e0.values[k];
  Eigen::VectorXd x(n + 1), F(n + 1);
  Matrix J(n + 1, n + 1);
  for (int sub = 1; sub <= substeps; ++sub) {
    const double target = s * sub / substeps;
    if (sub == 1) {
      v = v0 + target * e0.right.col(k);
      sigma = e0.values[k] + 0.5 * target;
    }
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
      sys.require_in_ball(v, "Hugoniot locus");
      const State gv = sys.g(v);
      F.head(n) = sys.f(v) - f0 - sigma * (gv - g0);
      F[n] = l.dot(v - v0) - target;
      const double scale = 1.0 + f0.norm();
      if (F.cwiseAbs().maxCoeff() <= 1e-14 * scale) {
        converged = true;
        break;
      }
      J.topLeftCorner(n, n) = sys.df(v) - sigma * sys.dg(v);
      J.topRightCorner(n, 1) = -(gv - g0);
      J.bottomLeftCorner(1, n) = l.transpose();
      J(n, n) = 0.0;
      const Eigen::VectorXd dx = J.fullPivLu().solve(-F);
      v += dx.head(n);
      sigma += dx[n];
      if (dx.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + v.norm())) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw Error(ErrorKind::RiemannFailed,
                  "Riemann solver failed: Hugoniot Newton did not converge from " +
                      format_state(v0));
    }
  }
  return {v, sigma};
}

State wave_curve(const SystemDef& sys, const State& v0, int k, double s,
                 const WaveCurveOptions& opts) {
  check_strength(sys, s, opts);
  if (s == 0.0) return v0;
  if (sys.kinds[k] == FieldKind::LinearlyDegenerate || s > 0.0) {
    return integral_curve(sys, v0, k, s, opts);
  }
  return hugoniot_point(sys, v0, k, s, opts).state;
}

double rankine_hugoniot_speed(const SystemDef& sys, const State& vl, const State& vr) {
  const State dg = sys.g(vr) - sys.g(vl);
  const State df = sys.f(vr) - sys.f(vl);
  const double nn = dg.squaredNorm();
  return nn > 0 ? dg.dot(df) / nn : 0.0;
}

Wave make_wave(const SystemDef& sys, const State& left, int k, double s,
               const WaveCurveOptions& opts) {
  check_strength(sys, s, opts);
  Wave w;
  w.family = k;
  w.left = left;
  w.strength = s;
  if (sys.kinds[k] == FieldKind::LinearlyDegenerate) {
    w.kind = WaveKind::Contact;
    w.right = integral_curve(sys, left, k, s, opts);
    w.speed = w.speed_right = eigen_structure(sys, left).values[k];
  } else if (s > 0.0) {
    w.kind = WaveKind::Rarefaction;
    w.right = integral_curve(sys, left, k, s, opts);
    w.speed = eigen_structure(sys, left).values[k];
    w.speed_right = eigen_structure(sys, w.right).values[k];
  } else {
    w.kind = WaveKind::Shock;
    const HugoniotPoint hp = hugoniot_point(sys, left, k, s, opts);
    w.right = hp.state;
    w.speed = w.speed_right = hp.speed;
  }
  return w;
}

RiemannFan compose_fan(const SystemDef& sys, const State& vl, const Eigen::VectorXd& strengths,
                       const WaveCurveOptions& opts) {
  RiemannFan fan;
  fan.states.push_back(vl);
  State w = vl;
  for (int k = 0; k < sys.dim; ++k) {
    if (strengths[k] == 0.0) continue;
    Wave wave = make_wave(sys, w, k, strengths[k], opts);
    w = wave.right;
    fan.waves.push_back(std::move(wave));
    fan.states.push_back(w);
  }
  return fan;
}

namespace {

State compose_state(const SystemDef& sys, const State& vl, const Eigen::VectorXd& s,
                    const WaveCurveOptions& opts) {
  State w = vl;
  for (int k = 0; k < sys.dim; ++k) w = wave_curve(sys, w, k, s[k], opts);
  return w;
}

}  // namespace

Eigen::VectorXd riemann_strengths(const SystemDef& sys, const State& vl, const State& vr,
                                  const RiemannOptions& opts) {
  const int n = sys.dim;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  if ((vl - vr).cwiseAbs().maxCoeff() == 0.0) return s;
  const Matrix L = eigen_structure(sys, vl).left;
  const double tol = opts.tol * (1.0 + vr.norm());

  // Residual in left-eigenvector coordinates: its Jacobian at s = 0 is I.
  auto residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    try {
      out = L * (compose_state(sys, vl, x, opts.curve) - vr);
      return true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SmallDataViolated && e.kind() != ErrorKind::RiemannFailed) throw;
      return false;
    }
  };

  Matrix B = Matrix::Identity(n, n);
  Eigen::VectorXd G;
  if (!residual(s, G)) {
    throw Error(ErrorKind::RiemannFailed, "Riemann solver failed: initial residual undefined");
  }
  double last = G.norm();
  for (int it = 0; it < opts.max_iter; ++it) {
    if (G.cwiseAbs().maxCoeff() <= tol) return s;
    Eigen::VectorXd step = -B.fullPivLu().solve(G);
    double damping = 1.0;
    Eigen::VectorXd Gn;
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving) {
      if (residual(s + damping * step, Gn) && Gn.norm() < last) {
        accepted = true;
        break;
      }
      damping *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd ds = damping * step;
    const Eigen::VectorXd dG = Gn - G;
    B += ((dG - B * ds) * ds.transpose()) / ds.squaredNorm();
    s += ds;
    G = Gn;
    last = G.norm();
  }
  if (G.cwiseAbs().maxCoeff() <= tol) return s;
  throw Error(ErrorKind::RiemannFailed,
              "Riemann solver failed: last residual " + std::to_string(G.norm()) + " for " +
                  format_state(vl) + " -> " + format_state(vr));
}

RiemannFan solve_riemann(const SystemDef& sys, const State& vl, const State& vr,
                         const RiemannOptions& opts) {
  RiemannFan fan = compose_fan(sys, vl, riemann_strengths(sys, vl, vr, opts), opts.curve);
  if (!fan.waves.empty()) fan.states.back() = vr;
  if (!fan.waves.empty()) fan.waves.back().right = vr;
  return fan;
}

State sample_fan(const SystemDef& sys, const RiemannFan& fan, double xi,
                 const WaveCurveOptions& opts) {
  if (fan.states.empty()) return State();
  for (const Wave& w : fan.waves) {
    if (xi < w.speed) return w.left;
    if (w.kind == WaveKind::Rarefaction && xi < w.speed_right) {
      double lo = 0.0, hi = w.strength;
      while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        const State m = integral_curve(sys, w.left, w.family, mid, opts);
        if (eigen_structure(sys, m).values[w.family] < xi) lo = mid;
        else hi = mid;
      }
      return integral_curve(sys, w.left, w.family, 0.5 * (lo + hi), opts);
    }
  }
  return fan.states.back();
}

std::vector<Wave> discretize_rarefaction(const SystemDef& sys, const Wave& wave, double delta,
                                         const WaveCurveOptions& opts) {
  std::vector<Wave> fronts;
  if (wave.kind != WaveKind::Rarefaction || wave.strength <= 0.0) return fronts;
  const int m = std::max(1, static_cast<int>(std::ceil(wave.strength / delta - 1e-12)));
  const double piece = wave.strength / m;
  State prev = wave.left;
  for (int i = 1; i <= m; ++i) {
    State next = i == m ? wave.right : integral_curve(sys, wave.left, wave.family, piece * i, opts);
    Wave f;
    f.family = wave.family;
    f.kind = WaveKind::Rarefaction;
    f.left = prev;
    f.right = next;
    f.speed = f.speed_right = eigen_structure(sys, next).values[wave.family];
    f.strength = piece;
    fronts.push_back(std::move(f));
    prev = std::move(next);
  }
  return fronts;
}

}  // namespace bfront
