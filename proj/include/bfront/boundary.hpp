#pragma once

#include "bfront/riemann.hpp"

#include <optional>
#include <vector>

namespace bfront {

/// v_t + A v_x = eps D v_xx on x > 0 with v(0, x) = v0 and v(t, 0) = vb.
struct LinearBoundaryProblem {
  Matrix A;
  Matrix D;
  State v0;
  State vb;
};

struct LinearTrace {
  State trace;
  RiemannFan fan;  // outgoing contacts from the trace to v0
};

/// Inviscid boundary value of the linear problem: vb - trace lies in the
/// stable subspace of D^{-1}A, trace - v0 in the span of the eigenvectors of
/// A with positive eigenvalue.
LinearTrace linear_boundary_trace(const LinearBoundaryProblem& prob);

/// Residual of the viscous boundary condition at y = 0: every parabolic
/// component of w0 - vb, then l_i . (w0 - vb)_hyp for each positive
/// eigenvalue of the hyperbolic block of Df(vb). Its length varies with the
/// number of incoming hyperbolic characteristics.
Eigen::VectorXd beta_tilde(const SystemDef& sys, const State& w0, const State& vb);

/// A boundary layer D(w) w' = f(w) - f(limit) on y in [0, y.back()].
struct BoundaryLayerProfile {
  std::vector<double> y;
  std::vector<State> w;
  State limit;
  double xi = 0.0;  // center coordinate, signed
  double endpoint_residual = 0.0;
  double beta_residual = 0.0;
  double layer_residual = 0.0;

  static BoundaryLayerProfile constant(const State& v);
};

/// Which linearized directions at the limit state carry the layer.
enum class LayerMode {
  Stable,          // eigenvalues with negative real part
  StableCenter,    // plus the eigenvalue closest to 0 (GNL characteristic)
  StableSkipZero,  // stable, ignoring the identically vanishing one (LD characteristic)
};

/// Shooting map for the layer equation at a fixed limit state.
///
/// c holds coordinates in the selected invariant subspace of the reduced
/// linearization M; w(0) is obtained by integrating backward from
/// limit + B exp(H T) c, so that to first order w(0) = limit + B c.
class LayerShooter {
 public:
  LayerShooter(const SystemDef& sys, const State& limit, LayerMode mode,
               const Matrix* reference_basis = nullptr, double horizon = -1.0);

  int dim() const { return static_cast<int>(basis_.cols()); }
  const Matrix& basis() const { return basis_; }
  double horizon() const { return horizon_; }
  int center_col() const { return center_col_; }

  State shoot(const Eigen::VectorXd& c) const;
  /// Full profile; none if the forward tail does not settle at the limit.
  std::optional<BoundaryLayerProfile> profile(const Eigen::VectorXd& c, const State& vb) const;

 private:
  State complete(const State& z, State& guess) const;
  State rhs(const State& z, State& guess) const;
  double local_rate(const State& z, State guess) const;
  State integrate(State z, double dy, State& guess, int refine = 1) const;
  std::vector<double> grid(int count) const;
  // Backward sweep from the horizon; optionally records the grid samples
  // y_i <= horizon (index i stored at position i).
  State sweep_back(const Eigen::VectorXd& c, const std::vector<double>& ys,
                   std::vector<State>* samples) const;

  const SystemDef* sys_;
  State limit_;
  State f_limit_;
  int h_ = 0;
  int p_ = 0;
  Matrix basis_;      // p x d
  Matrix restricted_; // d x d
  Matrix projector_;  // p x p
  double horizon_ = 0.0;
  double y_max_ = 40.0;
  double rate_ = 1.0;
  int center_col_ = -1;
  // Factorized parabolic block of D when D does not depend on the state.
  std::optional<Eigen::PartialPivLU<Matrix>> constant_D_;
};

/// Reduced linearization of the layer field at v (parabolic coordinates).
Matrix layer_matrix(const SystemDef& sys, const State& v);

LayerMode default_layer_mode(const SystemDef& sys, const State& limit);

struct LayerOptions {
  double tol = 1e-9;
  int max_iter = 40;
};

/// Decaying layer from vb (in the sense of beta_tilde) to `limit`, if any.
std::optional<BoundaryLayerProfile> solve_boundary_layer(const SystemDef& sys, const State& limit,
                                                         const State& vb,
                                                         const LayerOptions& opts = {});

struct EquivWitness {
  bool holds = false;
  State sub_trace;
  std::optional<Wave> boundary_wave;  // 0-speed shock or contact from sub_trace to trace
  std::optional<BoundaryLayerProfile> profile;
};

/// trace ~_D vb: a 0-speed Lax shock (or contact) trace <- sub_trace plus a
/// boundary layer from vb to sub_trace.
EquivWitness check_equiv_D(const SystemDef& sys, const State& trace, const State& vb,
                           const LayerOptions& opts = {});

/// Trace selected by the ~_* relation: the Riemann fan from vb to the
/// interior state, sampled at x/t = 0+.
State star_trace(const SystemDef& sys, const State& interior, const State& vb,
                 const RiemannOptions& opts = {});

/// trace ~_* vb: every wave of the fan from vb to trace has speed <= 0.
bool check_equiv_star(const SystemDef& sys, const State& trace, const State& vb,
                      const RiemannOptions& opts = {});

enum class BoundaryBranch {
  Trivial,
  NonCharacteristic,
  StableCharacteristic,    // boundary family enters the layer
  OutgoingCharacteristic,  // boundary family leaves as a positive-speed wave
  Center,                  // center layer + rarefaction starting at speed 0
  ZeroSpeedShock,
  ZeroSpeedContact,
};

const char* to_string(BoundaryBranch branch);

struct BoundaryFan {
  BoundaryBranch branch = BoundaryBranch::Trivial;
  int boundary_family = -1;
  State trace;
  State sub_trace;
  std::optional<Wave> boundary_wave;
  double xi = 0.0;
  BoundaryLayerProfile layer;
  std::vector<Wave> waves;  // outgoing, speed > 0, families increasing
};

struct BoundaryOptions {
  RiemannOptions riemann;
  LayerOptions layer;
  double tol = 1e-10;
  int max_iter = 40;
};

/// Boundary Riemann problem: constant interior state on x > 0, constant
/// boundary datum vb.
BoundaryFan solve_boundary_riemann(const SystemDef& sys, const State& interior, const State& vb,
                                   const BoundaryOptions& opts = {});

}  // namespace bfront
