#include "bfront/system.hpp"

#include <cmath>

namespace bfront {

SystemPtr make_linear(const Matrix& A, const Matrix& D, const State& reference,
                      double radius) {
  if (A.rows() != A.cols() || D.rows() != A.rows() || D.cols() != A.cols()) {
    throw Error(ErrorKind::InvalidArgument, "linear system: A and D must be square of equal size");
  }
  SystemDef sys;
  sys.name = "linear";
  sys.dim = static_cast<int>(A.rows());
  sys.flux = [A](const State& v) -> State { return A * v; };
  sys.flux_jacobian = [A](const State&) -> Matrix { return A; };
  sys.viscosity = [D](const State&) -> Matrix { return D; };
  sys.kinds.assign(sys.dim, FieldKind::LinearlyDegenerate);
  sys.reference = reference.size() == sys.dim ? reference : State(State::Zero(sys.dim));
  sys.radius = radius > 0 ? radius : 10.0 * (1.0 + sys.reference.norm());
  sys.s_max = 2.0 * sys.radius;
  // Count leading zero rows/columns of D for the block form.
  int h = 0;
  while (h < sys.dim && D.row(h).cwiseAbs().maxCoeff() == 0.0 &&
         D.col(h).cwiseAbs().maxCoeff() == 0.0) {
    ++h;
  }
  sys.hyperbolic_count = h;
  return finalize(std::move(sys));
}

SystemPtr make_burgers(double shift, double reference, double radius) {
  SystemDef sys;
  sys.name = shift == 0.0 ? "burgers" : "shifted-burgers";
  sys.dim = 1;
  sys.flux = [shift](const State& v) -> State {
    State out(1);
    out[0] = 0.5 * (v[0] - shift) * (v[0] - shift);
    return out;
  };
  sys.flux_jacobian = [shift](const State& v) -> Matrix {
    Matrix J(1, 1);
    J(0, 0) = v[0] - shift;
    return J;
  };
  sys.viscosity = [](const State&) -> Matrix { return Matrix::Identity(1, 1); };
  sys.kinds = {FieldKind::GenuinelyNonlinear};
  sys.reference = State::Constant(1, reference);
  sys.radius = radius > 0 ? radius : 2.0 * (1.0 + std::abs(reference));
  sys.entropy = [shift](const State& v) { return 0.5 * (v[0] - shift) * (v[0] - shift); };
  sys.entropy_flux = [shift](const State& v) {
    const double w = v[0] - shift;
    return w * w * w / 3.0;
  };
  return finalize(std::move(sys));
}

SystemPtr make_p_system(double gamma, Viscosity viscosity, double mu,
                        State reference, double radius) {
  if (gamma <= 1.0) throw Error(ErrorKind::InvalidArgument, "p-system: gamma must exceed 1");
  SystemDef sys;
  sys.name = "p-system";
  sys.dim = 2;
  sys.flux = [gamma](const State& v) -> State {
    State out(2);
    out << -v[1], std::pow(v[0], -gamma);
    return out;
  };
  sys.flux_jacobian = [gamma](const State& v) -> Matrix {
    Matrix J(2, 2);
    J << 0.0, -1.0, -gamma * std::pow(v[0], -gamma - 1.0), 0.0;
    return J;
  };
  if (viscosity == Viscosity::Artificial) {
    sys.viscosity = [](const State&) -> Matrix { return Matrix::Identity(2, 2); };
  } else {
    sys.viscosity = [mu](const State& v) -> Matrix {
      Matrix D = Matrix::Zero(2, 2);
      D(1, 1) = mu / v[0];
      return D;
    };
    sys.hyperbolic_count = 1;
  }
  sys.kinds.assign(2, FieldKind::GenuinelyNonlinear);
  if (reference.size() != 2) {
    reference = State(2);
    reference << 1.0, 0.0;
  }
  sys.reference = reference;
  sys.radius = radius > 0 ? radius : default_radius(reference);
  sys.entropy = [gamma](const State& v) {
    return 0.5 * v[1] * v[1] + std::pow(v[0], 1.0 - gamma) / (gamma - 1.0);
  };
  sys.entropy_flux = [gamma](const State& v) { return std::pow(v[0], -gamma) * v[1]; };
  return finalize(std::move(sys));
}

SystemPtr make_lagrangian_euler(double gamma, Viscosity viscosity, double mu,
                                double kappa, State reference, double radius) {
  if (gamma <= 1.0) throw Error(ErrorKind::InvalidArgument, "euler: gamma must exceed 1");
  SystemDef sys;
  sys.name = "lagrangian-euler";
  sys.dim = 3;
  auto pressure = [gamma](const State& v) {
    return (gamma - 1.0) * (v[2] - 0.5 * v[1] * v[1]) / v[0];
  };
  sys.flux = [pressure](const State& v) -> State {
    const double p = pressure(v);
    State out(3);
    out << -v[1], p, p * v[1];
    return out;
  };
  sys.flux_jacobian = [gamma, pressure](const State& v) -> Matrix {
    const double p = pressure(v);
    const double p_tau = -p / v[0];
    const double p_u = -(gamma - 1.0) * v[1] / v[0];
    const double p_E = (gamma - 1.0) / v[0];
    Matrix J(3, 3);
    J << 0.0, -1.0, 0.0,
         p_tau, p_u, p_E,
         v[1] * p_tau, p + v[1] * p_u, v[1] * p_E;
    return J;
  };
  if (viscosity == Viscosity::Artificial) {
    sys.viscosity = [](const State&) -> Matrix { return Matrix::Identity(3, 3); };
  } else {
    // Velocity and temperature diffuse; unit specific heat.
    sys.viscosity = [mu, kappa](const State& v) -> Matrix {
      Matrix D = Matrix::Zero(3, 3);
      D(1, 1) = mu / v[0];
      D(2, 1) = (mu - kappa) * v[1] / v[0];
      D(2, 2) = kappa / v[0];
      return D;
    };
    sys.hyperbolic_count = 1;
  }
  sys.kinds = {FieldKind::GenuinelyNonlinear, FieldKind::LinearlyDegenerate,
               FieldKind::GenuinelyNonlinear};
  if (reference.size() != 3) {
    reference = State(3);
    reference << 1.0, 0.0, 1.0 / (gamma - 1.0);  // p = 1
  }
  sys.reference = reference;
  sys.radius = radius > 0 ? radius : 0.25;
  return finalize(std::move(sys));
}

}  // namespace bfront
