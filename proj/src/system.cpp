#include "bfront/system.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace bfront {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::HyperbolicityViolated: return "hyperbolicity violated";
    case ErrorKind::MultipleCharacteristic: return "multiple characteristic fields unsupported";
    case ErrorKind::SmallDataViolated: return "small-data regime violated";
    case ErrorKind::RiemannFailed: return "Riemann solver failed";
    case ErrorKind::CharacteristicHyperbolicBlock: return "characteristic hyperbolic block";
    case ErrorKind::DegenerateTraceSystem: return "degenerate trace system";
    case ErrorKind::MarginalSpectrum: return "marginal spectrum";
    case ErrorKind::DaeReductionFailed: return "DAE reduction failed";
    case ErrorKind::BoundaryRiemannFailed: return "boundary Riemann solver failed";
    case ErrorKind::SmallDataGuard: return "small-data guard";
    case ErrorKind::VariationBlowUp: return "variation blow-up";
    case ErrorKind::FrontExplosion: return "front explosion";
    case ErrorKind::ViscousOutOfRegime: return "viscous solver out of regime";
    case ErrorKind::InvalidScenario: return "invalid scenario";
    case ErrorKind::InvalidArgument: return "invalid argument";
  }
  return "unknown error";
}

std::string format_state(const State& v) {
  std::ostringstream os;
  os.precision(10);
  os << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) os << ", ";
    os << v[i];
  }
  os << ')';
  return os.str();
}

Matrix finite_difference_jacobian(const VectorField& f, const State& v) {
  const Eigen::Index n = v.size();
  const double h = 1e-6 * (1.0 + v.norm());
  State f0 = f(v);
  Matrix J(f0.size(), n);
  State vp = v, vm = v;
  for (Eigen::Index j = 0; j < n; ++j) {
    vp[j] = v[j] + h;
    vm[j] = v[j] - h;
    J.col(j) = (f(vp) - f(vm)) / (2.0 * h);
    vp[j] = v[j];
    vm[j] = v[j];
  }
  return J;
}

Matrix SystemDef::df(const State& v) const {
  return flux_jacobian ? flux_jacobian(v) : finite_difference_jacobian(flux, v);
}

Matrix SystemDef::dg(const State& v) const {
  if (conserved_jacobian) return conserved_jacobian(v);
  if (!conserved) return Matrix::Identity(dim, dim);
  return finite_difference_jacobian(conserved, v);
}

Matrix SystemDef::characteristic_matrix(const State& v) const {
  if (!conserved) return df(v);
  return dg(v).partialPivLu().solve(df(v));
}

void SystemDef::require_in_ball(const State& v, const char* what) const {
  if (!v.allFinite() || !in_ball(v)) {
    throw Error(ErrorKind::SmallDataViolated,
                std::string("small-data regime violated: ") + what + " at " +
                    format_state(v));
  }
}

std::vector<State> SystemDef::ball_samples() const {
  std::vector<State> out;
  out.push_back(reference);
  for (int i = 0; i < dim; ++i) {
    for (double frac : {-0.95, -0.5, 0.5, 0.95}) {
      State v = reference;
      v[i] += frac * radius;
      out.push_back(v);
    }
  }
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int s = 0; s < 24; ++s) {
    State dir(dim);
    for (int i = 0; i < dim; ++i) dir[i] = normal(rng);
    dir.normalize();
    out.push_back(reference + 0.95 * radius * std::pow(uniform(rng), 1.0 / dim) * dir);
  }
  return out;
}

namespace {

struct RawEigen {
  State values;
  Matrix right;
};

RawEigen raw_eigen(const SystemDef& sys, const State& v) {
  const Matrix A = sys.characteristic_matrix(v);
  const int n = sys.dim;
  if (!A.allFinite()) {
    throw Error(ErrorKind::HyperbolicityViolated,
                "hyperbolicity violated: non-finite Jacobian at " + format_state(v));
  }
  Eigen::EigenSolver<Matrix> es(A);
  const Eigen::VectorXcd lam = es.eigenvalues();
  const Eigen::MatrixXcd vec = es.eigenvectors();
  const double scale = 1.0 + A.cwiseAbs().maxCoeff();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return lam[a].real() < lam[b].real(); });
  RawEigen out{State(n), Matrix(n, n)};
  for (int k = 0; k < n; ++k) {
    const int idx = order[k];
    if (std::abs(lam[idx].imag()) > 1e-10 * scale) {
      throw Error(ErrorKind::HyperbolicityViolated,
                  "hyperbolicity violated: complex eigenvalue at " + format_state(v));
    }
    out.values[k] = lam[idx].real();
    out.right.col(k) = vec.col(idx).real();
    out.right.col(k).normalize();
  }
  for (int k = 1; k < n; ++k) {
    if (out.values[k] - out.values[k - 1] <= 1e-9 * scale) {
      throw Error(ErrorKind::HyperbolicityViolated,
                  "hyperbolicity violated: coalescing eigenvalues at " + format_state(v));
    }
  }
  return out;
}

// l . (dA[r]) r, the directional derivative of the eigenvalue along r.
double directional_nonlinearity(const SystemDef& sys, const State& v,
                                const State& r, const State& l) {
  // Fourth-order stencil; a wide step keeps round-off near 1e-13.
  const double h = 1e-3 * (1.0 + v.norm()) / std::max(r.norm(), 1e-300);
  const auto A = [&](double t) { return sys.characteristic_matrix(v + t * r); };
  const Matrix dA = (8.0 * (A(h) - A(-h)) - (A(2.0 * h) - A(-2.0 * h))) / (12.0 * h);
  return l.dot(dA * r);
}

}  // namespace

EigenDecomposition eigen_structure(const SystemDef& sys, const State& v) {
  RawEigen raw = raw_eigen(sys, v);
  const int n = sys.dim;
  EigenDecomposition out;
  out.state = v;
  out.values = raw.values;
  out.right = raw.right;
  for (int k = 0; k < n; ++k) {
    if (sys.reference_right.size() > 0 && out.right.col(k).dot(sys.reference_right.col(k)) < 0) {
      out.right.col(k) *= -1.0;
    }
  }
  out.left = out.right.inverse();
  for (int k = 0; k < n; ++k) {
    if (sys.kinds[k] != FieldKind::GenuinelyNonlinear) continue;
    const double d = directional_nonlinearity(sys, v, out.right.col(k), out.left.row(k).transpose());
    if (std::abs(d) < 1e-9) {
      throw Error(ErrorKind::HyperbolicityViolated,
                  "field " + std::to_string(k + 1) + " is not genuinely nonlinear at " +
                      format_state(v));
    }
    out.right.col(k) /= d;
    out.left.row(k) *= d;
  }
  return out;
}

double nonlinearity(const SystemDef& sys, const State& v, int k) {
  const EigenDecomposition e = eigen_structure(sys, v);
  return directional_nonlinearity(sys, v, e.right.col(k), e.left.row(k).transpose());
}

std::optional<int> classify_boundary_field(const SystemDef& sys, const State& v) {
  const EigenDecomposition e = eigen_structure(sys, v);
  std::vector<int> hits;
  for (int k = 0; k < sys.dim; ++k) {
    if (std::abs(e.values[k]) <= sys.tol_char || sys.sign_changing[k]) hits.push_back(k);
  }
  if (hits.size() > 1) {
    throw Error(ErrorKind::MultipleCharacteristic,
                "multiple characteristic fields unsupported at " + format_state(v));
  }
  if (hits.empty()) return std::nullopt;
  return hits.front();
}

double default_radius(const State& reference) {
  return 0.25 * (1.0 + reference.norm());
}

SystemPtr finalize(SystemDef sys) {
  const int n = sys.dim;
  if (n <= 0 || static_cast<int>(sys.kinds.size()) != n || sys.reference.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "system '" + sys.name + "': inconsistent dimensions");
  }
  if (!sys.flux || !sys.viscosity) {
    throw Error(ErrorKind::InvalidArgument, "system '" + sys.name + "': flux and viscosity required");
  }
  if (sys.radius <= 0.0) sys.radius = default_radius(sys.reference);

  // Block normal form of D at the reference state.
  const Matrix D0 = sys.viscosity(sys.reference);
  const int h = sys.hyperbolic_count;
  if (h < 0 || h >= n + 1) {
    throw Error(ErrorKind::InvalidArgument, "system '" + sys.name + "': bad hyperbolic block size");
  }
  for (const State& v : sys.ball_samples()) {
    const Matrix D = sys.viscosity(v);
    if (h > 0 && (D.topRows(h).cwiseAbs().maxCoeff() > 0.0 ||
                  D.leftCols(h).cwiseAbs().maxCoeff() > 0.0)) {
      throw Error(ErrorKind::InvalidArgument,
                  "system '" + sys.name + "': viscosity not in block normal form");
    }
    if (h < n) {
      const Matrix b = D.bottomRightCorner(n - h, n - h);
      const Matrix sym = 0.5 * (b + b.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
      if (es.eigenvalues().minCoeff() <= 0.0) {
        throw Error(ErrorKind::InvalidArgument,
                    "system '" + sys.name + "': parabolic block not positive definite");
      }
    }
    if (sys.conserved && std::abs(sys.dg(v).determinant()) < 1e-12) {
      throw Error(ErrorKind::InvalidArgument,
                  "system '" + sys.name + "': Jacobian of g singular at " + format_state(v));
    }
  }

  // Reference eigenvectors fix the orientation of linearly degenerate fields.
  {
    RawEigen raw = raw_eigen(sys, sys.reference);
    for (int k = 0; k < n; ++k) {
      Eigen::Index imax = 0;
      raw.right.col(k).cwiseAbs().maxCoeff(&imax);
      if (raw.right(imax, k) < 0) raw.right.col(k) *= -1.0;
    }
    sys.reference_right = raw.right;
  }

  sys.sign_changing.assign(n, false);
  std::vector<double> lo(n, 1e300), hi(n, -1e300);
  double max_top = -1e300, max_abs = 0.0;
  for (const State& v : sys.ball_samples()) {
    const EigenDecomposition e = eigen_structure(sys, v);
    for (int k = 0; k < n; ++k) {
      lo[k] = std::min(lo[k], e.values[k]);
      hi[k] = std::max(hi[k], e.values[k]);
      max_abs = std::max(max_abs, std::abs(e.values[k]));
    }
    max_top = std::max(max_top, e.values[n - 1]);
  }
  for (int k = 0; k < n; ++k) {
    sys.sign_changing[k] = lo[k] < -sys.tol_char && hi[k] > sys.tol_char;
  }
  sys.np_speed = std::max(max_top, 0.0) + 1.0;
  sys.max_speed = max_abs;

  // Kawashima-Shizuta: no eigenvector of the hyperbolic symbol in ker D.
  {
    const EigenDecomposition e = eigen_structure(sys, sys.reference);
    for (int k = 0; k < n; ++k) {
      const State r = e.right.col(k).normalized();
      if ((D0 * r).norm() <= 1e-8) {
        sys.warnings.push_back("Kawashima-Shizuta condition fails for field " +
                               std::to_string(k + 1) + " at the reference state");
      }
    }
  }
  return std::make_shared<const SystemDef>(std::move(sys));
}

}  // namespace bfront
