#pragma once

#include "bfront/boundary.hpp"
#include "bfront/data.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bfront {

struct FrontTrackingOptions {
  double delta = 1e-2;
  double rho = -1.0;  // simplified-solver threshold on |s_a s_b|; <= 0: delta^3
  double t_end = 1.0;
  bool boundary = true;  // false: Cauchy problem on the whole line

  double weight_boundary = 2.0;
  double c0 = 0.0;  // <= 0: calibrated on the run's own interactions

  double guard = -1.0;  // data-size guard; <= 0: sys.s_max
  bool enforce_guard = true;
  double tv_cap_factor = 20.0;
  long max_events = 200000;
  long max_fronts = 20000;

  BoundaryOptions boundary_riemann;
};

/// A moving discontinuity. Its position is affine in t from the anchor
/// (t0, x0); `wave.kind == NonPhysical` marks a non-physical front.
struct Front {
  double t0 = 0.0;
  double x0 = 0.0;
  double speed = 0.0;
  Wave wave;
  long seq = 0;

  double position(double t) const { return x0 + speed * (t - t0); }
  bool non_physical() const { return wave.kind == WaveKind::NonPhysical; }
  /// |s| for physical fronts, |v_r - v_l| for non-physical ones.
  double size() const;
};

struct BoundaryState {
  State vb;
  State trace;
  double xi = 0.0;
  std::optional<Wave> boundary_wave;  // 0-speed shock or contact at x = 0
  BoundaryBranch branch = BoundaryBranch::Trivial;

  /// xi_k of the interaction estimate: the parked 0-speed wave if any,
  /// else the center component of the layer.
  double xi_k() const;
};

struct GlimmSnapshot {
  double V = 0.0;   // weighted linear part, boundary terms included
  double Q = 0.0;   // approaching pairs
  double Qb = 0.0;  // fronts approaching the boundary, weighted
  double strength = 0.0;  // unweighted total strength, boundary terms included
  double upsilon(double c0) const { return V + c0 * (Q + Qb); }
};

enum class InteractionType { FrontFront, BoundaryHit, DatumJump };

const char* to_string(InteractionType type);

struct InteractionRecord {
  double t = 0.0;
  double x = 0.0;
  InteractionType type = InteractionType::FrontFront;
  std::vector<double> incoming;  // signed strengths of the incoming fronts
  int family = -1;               // hitting family (boundary hits)
  bool characteristic = false;   // hitting family is the boundary characteristic one
  double varsigma = 0.0;
  double xi_pre = 0.0;
  double delta_v = 0.0;  // increase of the total strength
  double bound = 0.0;    // |s| ([varsigma]^- + |xi_pre|)
  bool simplified = false;
  bool no_op = false;
  GlimmSnapshot before;
  GlimmSnapshot after;
};

struct FrontSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  double x0 = 0.0;
  double speed = 0.0;
  Wave wave;
};

struct TracePoint {
  double t = 0.0;
  State vb;
  State trace;
  double xi = 0.0;
  BoundaryBranch branch = BoundaryBranch::Trivial;
};

struct FunctionalPoint {
  double t = 0.0;
  GlimmSnapshot glimm;
  double total_variation = 0.0;
  int fronts = 0;
};

/// Piece of a sampled profile: `state` on (x_left, x_right).
struct ProfilePiece {
  double x_left = 0.0;
  double x_right = 0.0;
  State state;
};

struct Trajectory {
  bool boundary = true;
  double t_end = 0.0;
  double delta = 0.0;
  double c0 = 0.0;
  double initial_size = 0.0;
  double sup_tv = 0.0;
  long events = 0;
  long max_fronts_seen = 0;
  State far_left;
  State far_right;
  std::vector<FrontSegment> segments;
  std::vector<InteractionRecord> records;
  std::vector<FunctionalPoint> functional;
  std::vector<TracePoint> traces;

  bool ok = true;
  ErrorKind error_kind = ErrorKind::InvalidArgument;
  std::string error;

  /// Piecewise constant profile at time t on (x_min, x_max).
  std::vector<ProfilePiece> profile(double t, double x_min, double x_max) const;
  State sample(double t, double x) const;
  /// Fronts alive at time t, ordered by position.
  std::vector<std::pair<double, const FrontSegment*>> fronts_at(double t) const;
  const TracePoint& trace_at(double t) const;
};

/// Mutable state of one simulation.
struct FTState {
  const SystemDef* sys = nullptr;
  FrontTrackingOptions opts;
  double t = 0.0;
  std::vector<Front> fronts;  // ordered by position
  BoundaryState bdry;
  std::vector<std::pair<double, State>> datum_jumps;  // (time, new value)
  std::size_t next_jump = 0;
  State far_left;   // whole-line runs
  State far_right;
  int boundary_family = -1;
  long next_seq = 0;
  std::vector<FrontSegment> closed;  // finished front paths

  double rho() const;
  double remaining_datum_variation() const;
  double total_variation() const;
  /// State immediately right of x = 0 (or of -infinity on the whole line).
  State leftmost_state() const;
};

std::pair<Datum, Datum> quantize_data(const SystemDef& sys, const Datum& v0, const Datum& vb,
                                      double delta, bool enforce_guard = true, double guard = -1.0);

/// TotVar v0 + TotVar vb + |v0(0+) - vb(0+)|.
double initial_data_size(const Datum& v0, const Datum& vb);

enum class EventKind { None, Collision, BoundaryHit, DatumJump };

struct Event {
  EventKind kind = EventKind::None;
  double t = 0.0;
  double x = 0.0;
  std::vector<int> participants;  // front indices
};

Event next_event(const FTState& state);

/// Builds the initial state (quantized data, initial Riemann and boundary
/// Riemann problems) at t = 0.
FTState initial_state(const SystemDef& sys, const Datum& v0, const Datum& vb,
                      const FrontTrackingOptions& opts);

/// Moves every front to time t (no event may occur in between).
void advance(FTState& state, double t);

/// Fronts [first, last] meet at one point: replaces them by the approximate
/// Riemann fan between the extreme states.
InteractionRecord resolve_interior(FTState& state, int first, int last);
/// Fronts [0, count) sit at x = 0 with negative speed.
InteractionRecord resolve_boundary_hit(FTState& state, int count);
InteractionRecord resolve_datum_jump(FTState& state);

GlimmSnapshot glimm_functional(const FTState& state);

/// Fronts approximating the wave (rarefactions discretized).
std::vector<Front> make_fronts(const SystemDef& sys, const Wave& wave, double t, double x,
                               double delta);

/// Runs to opts.t_end. Solver diagnostics are reported in the trajectory.
Trajectory run(const SystemDef& sys, const Datum& v0, const Datum& vb,
               const FrontTrackingOptions& opts);

/// Smallest power of 2 for which Upsilon does not grow by more than `slack`
/// across the recorded interactions (or, failing that, violates least often).
double calibrate_c0(const std::vector<InteractionRecord>& records, double slack);

/// Fraction of interactions across which Upsilon grows by at most `slack`.
double monotone_fraction(const std::vector<InteractionRecord>& records, double c0, double slack);

// Residuals -----------------------------------------------------------------

/// Smooth bump phi(t, x) = a * b((t - tc) / rt) * b((x - xc) / rx), with
/// b(z) = (1 - z^2)^4 on |z| < 1. Nonnegative.
struct TestFunction {
  double tc = 0.5, rt = 0.25;
  double xc = 1.0, rx = 0.5;
  double amplitude = 1.0;
  double value(double t, double x) const;
  double dt(double t, double x) const;
  double dx(double t, double x) const;
};

/// Integral of g(v) phi_t + f(v) phi_x over the support of phi, per component.
State weak_residual(const SystemDef& sys, const Trajectory& traj, const TestFunction& phi);
/// Integral of eta(v) phi_t + q(v) phi_x; >= 0 up to discretization for an
/// entropy solution and phi >= 0.
double entropy_residual(const SystemDef& sys, const Trajectory& traj, const TestFunction& phi);

/// L1 distance on [x_min, x_max] at time t to a reference function whose
/// discontinuities lie in `breaks`.
double l1_distance(const Trajectory& traj, double t, double x_min, double x_max,
                   const std::function<State(double)>& reference,
                   const std::vector<double>& breaks = {}, double panel = 1e-3);

}  // namespace bfront
