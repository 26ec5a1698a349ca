#pragma once

#include "bfront/data.hpp"
#include "bfront/system.hpp"

#include <vector>

namespace bfront {

struct ViscousOptions {
  double length = 1.0;
  double dx = -1.0;     // <= 0: 2e-4 * length
  double safety = 0.4;  // Delta t factor
  double trace_k = 20.0;
  // Without a boundary the left end is an outflow end too and the domain
  // is [-length, length].
  bool boundary = true;
};

/// Node-centered grid, node i at x0 + i dx. With a boundary, node 0 sits at
/// x = 0 and carries the boundary condition.
struct ViscousGrid {
  const SystemDef* sys = nullptr;
  double eps = 0.0;
  double dx = 0.0;
  double dt = 0.0;
  double x0 = 0.0;
  double t = 0.0;
  bool boundary = true;
  Matrix v;       // dim x nodes
  Datum vb;       // boundary datum in t
  double alpha = 0.0;  // numerical dissipation of the flux
  Matrix constant_D;   // set when D does not depend on the state

  // Work arrays reused across steps.
  Matrix scratch_f, scratch_face, scratch_next;
  std::vector<Matrix> scratch_D;

  int nodes() const { return static_cast<int>(v.cols()); }
  double x(int i) const { return x0 + i * dx; }
  /// Sum of g(v_i) dx over the interior nodes 1..nodes-2.
  State interior_mass() const;
};

ViscousGrid make_grid(const SystemDef& sys, const Datum& v0, const Datum& vb, double eps,
                      const ViscousOptions& opts = {});

/// Net amount of g leaving the interior nodes through the two cell faces
/// next to the ends during the last step, times dt (set by viscous_step).
struct StepFluxes {
  State left;   // inflow through the face between nodes 0 and 1
  State right;  // outflow through the face between nodes n-2 and n-1
};

StepFluxes viscous_step(ViscousGrid& grid);

struct ViscousSample {
  double t = 0.0;
  std::vector<double> x;
  std::vector<State> v;
  State trace;  // average over [K eps, 2K eps]; empty without a boundary
};

struct ViscousResult {
  std::vector<ViscousSample> samples;
  long steps = 0;
  double dt = 0.0;
  double dx = 0.0;
};

/// Integrates to T (the last requested sample time, or `t_end`).
ViscousResult viscous_solve(const SystemDef& sys, const Datum& v0, const Datum& vb, double eps,
                            double t_end, std::vector<double> sample_times = {},
                            const ViscousOptions& opts = {});

/// Average of the grid state over x in [lo, hi].
State window_average(const ViscousGrid& grid, double lo, double hi);

}  // namespace bfront
