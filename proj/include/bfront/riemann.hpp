#pragma once

#include "bfront/system.hpp"

#include <vector>

namespace bfront {

enum class WaveKind { Shock, Contact, Rarefaction, NonPhysical };

const char* to_string(WaveKind kind);

/// A single wave of a self-similar fan, or a single front in front tracking.
///
/// `family` is 0-based, -1 for non-physical fronts. For a centred
/// rarefaction `speed`/`speed_right` are the characteristic speeds at its
/// edges; for every jump (including discretized rarefaction fronts) they are
/// equal. `strength` is the Lax-curve parameter (Euclidean jump size for
/// non-physical fronts).
struct Wave {
  int family = -1;
  WaveKind kind = WaveKind::NonPhysical;
  State left;
  State right;
  double speed = 0.0;
  double speed_right = 0.0;
  double strength = 0.0;

  bool is_jump() const { return kind != WaveKind::Rarefaction || speed == speed_right; }
};

struct RiemannFan {
  std::vector<Wave> waves;
  std::vector<State> states;  // states[0] = left, states.back() = right
};

struct WaveCurveOptions {
  double s_max = -1.0;  // <= 0: the system's own s_max
  int rk_steps = 64;
};

/// State at parameter s along the k-th Lax curve through v0: integral curve
/// of r_k for s >= 0 on genuinely nonlinear fields (and for all s on linearly
/// degenerate ones), Hugoniot locus for s < 0.
State wave_curve(const SystemDef& sys, const State& v0, int k, double s,
                 const WaveCurveOptions& opts = {});

/// Integral curve of r_k through v0 (both signs of s).
State integral_curve(const SystemDef& sys, const State& v0, int k, double s,
                     const WaveCurveOptions& opts = {});

struct HugoniotPoint {
  State state;
  double speed;
};

/// Point of the k-th Hugoniot locus with l_k(v0).(v - v0) = s.
HugoniotPoint hugoniot_point(const SystemDef& sys, const State& v0, int k, double s,
                             const WaveCurveOptions& opts = {});

/// Builds the wave of family k and strength s emanating from `left`.
Wave make_wave(const SystemDef& sys, const State& left, int k, double s,
               const WaveCurveOptions& opts = {});

/// Rankine-Hugoniot speed of a jump from vl to vr (least squares).
double rankine_hugoniot_speed(const SystemDef& sys, const State& vl, const State& vr);

struct RiemannOptions {
  WaveCurveOptions curve;
  int max_iter = 50;
  double tol = 1e-12;
};

/// Strengths (s_1, ..., s_N) with Psi(v_l; s) = v_r.
Eigen::VectorXd riemann_strengths(const SystemDef& sys, const State& vl, const State& vr,
                                  const RiemannOptions& opts = {});

RiemannFan solve_riemann(const SystemDef& sys, const State& vl, const State& vr,
                         const RiemannOptions& opts = {});

/// Fan built from given strengths (zero strengths are dropped).
RiemannFan compose_fan(const SystemDef& sys, const State& vl, const Eigen::VectorXd& strengths,
                       const WaveCurveOptions& opts = {});

/// Self-similar value at x/t = xi.
State sample_fan(const SystemDef& sys, const RiemannFan& fan, double xi,
                 const WaveCurveOptions& opts = {});

/// Splits a rarefaction into ceil(s/delta) equal-strength jumps, each
/// travelling at the characteristic speed of its right state.
std::vector<Wave> discretize_rarefaction(const SystemDef& sys, const Wave& wave, double delta,
                                         const WaveCurveOptions& opts = {});

}  // namespace bfront
