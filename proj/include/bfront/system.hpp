#pragma once

#include "bfront/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bfront {

enum class FieldKind { GenuinelyNonlinear, LinearlyDegenerate };

using VectorField = std::function<State(const State&)>;
using MatrixField = std::function<Matrix(const State&)>;
using ScalarField = std::function<double(const State&)>;

/// A system g(v)_t + f(v)_x = eps (D(v) v_x)_x.
///
/// Field indices are 0-based everywhere in the library; the CLI prints them
/// 1-based. The viscosity matrix is in block normal form: the first
/// `hyperbolic_count` rows and columns of D vanish, the trailing block is
/// invertible with positive definite symmetric part.
struct SystemDef {
  std::string name;
  int dim = 0;

  VectorField flux;
  MatrixField flux_jacobian;       // empty: central differences
  VectorField conserved;           // empty: identity
  MatrixField conserved_jacobian;  // empty: identity / central differences
  MatrixField viscosity;
  int hyperbolic_count = 0;

  std::vector<FieldKind> kinds;
  State reference;
  double radius = 0.0;
  double tol_char = 1e-8;
  // Largest admissible wave-curve parameter; linear systems have no small-data limit.
  double s_max = 0.2;

  // Optional convex entropy pair (eta, q) with eta_t + q_x <= 0.
  ScalarField entropy;
  ScalarField entropy_flux;

  // Filled by finalize().
  Matrix reference_right;
  std::vector<bool> sign_changing;
  double np_speed = 0.0;
  double max_speed = 0.0;
  std::vector<std::string> warnings;

  State f(const State& v) const { return flux(v); }
  State g(const State& v) const { return conserved ? conserved(v) : v; }
  Matrix df(const State& v) const;
  Matrix dg(const State& v) const;
  Matrix D(const State& v) const { return viscosity(v); }
  /// (Dg)^{-1} Df, whose eigenvalues are the characteristic speeds.
  Matrix characteristic_matrix(const State& v) const;

  bool in_ball(const State& v) const {
    return (v - reference).norm() <= radius;
  }
  void require_in_ball(const State& v, const char* what) const;

  /// Fixed deterministic sample of the admissible ball.
  std::vector<State> ball_samples() const;
};

using SystemPtr = std::shared_ptr<const SystemDef>;

/// Validates the invariants of a system (invertible Dg, strict
/// hyperbolicity on the ball, block normal form, field tags) and fills the
/// derived members. Throws Error on violation.
SystemPtr finalize(SystemDef sys);

struct EigenDecomposition {
  State state;
  State values;   // ascending
  Matrix right;   // columns r_k
  Matrix left;    // rows l_k, left * right = I
};

EigenDecomposition eigen_structure(const SystemDef& sys, const State& v);

/// Index of the boundary characteristic field at v, if any.
std::optional<int> classify_boundary_field(const SystemDef& sys, const State& v);

/// grad(lambda_k) . r_k at v with the library normalization of r_k.
double nonlinearity(const SystemDef& sys, const State& v, int k);

Matrix finite_difference_jacobian(const VectorField& f, const State& v);

// Built-in catalogue -------------------------------------------------------

/// v_t + A v_x = eps D v_xx.
SystemPtr make_linear(const Matrix& A, const Matrix& D, const State& reference,
                      double radius = -1.0);
/// f(u) = (u - shift)^2 / 2, D = 1.
SystemPtr make_burgers(double shift = 0.0, double reference = 0.0,
                       double radius = -1.0);

enum class Viscosity { Artificial, NavierStokes };

/// Lagrangian isentropic gas, unknowns (v, u), f = (-u, v^-gamma).
SystemPtr make_p_system(double gamma = 2.0,
                        Viscosity viscosity = Viscosity::Artificial,
                        double mu = 1.0, State reference = State(),
                        double radius = -1.0);

/// Lagrangian full Euler, unknowns (tau, u, E) with E = e + u^2/2 and
/// p = (gamma - 1) e / tau. The middle eigenvalue vanishes identically.
SystemPtr make_lagrangian_euler(double gamma = 1.4,
                                Viscosity viscosity = Viscosity::Artificial,
                                double mu = 1.0, double kappa = 1.0,
                                State reference = State(), double radius = -1.0);

double default_radius(const State& reference);

}  // namespace bfront
