#pragma once

#include "bfront/types.hpp"

#include <functional>
#include <vector>

namespace bfront {

/// A bounded-variation datum on the half-line (in x or in t).
///
/// Either a step function (`values.size() == breaks.size() + 1`, value
/// `values[i]` on `(breaks[i-1], breaks[i])`), or a continuous `profile`
/// on [a, b] that is constant outside.
struct Datum {
  std::vector<double> breaks;
  std::vector<State> values;

  std::function<State(double)> profile;
  double a = 0.0;
  double b = 0.0;

  static Datum constant(const State& v);
  static Datum step(double at, const State& left, const State& right);

  bool piecewise_constant() const { return !profile; }
  int dim() const;
  /// Right limit at s.
  State operator()(double s) const;
  double total_variation() const;
};

/// Staircase approximation: equal arc-length levels of size <= delta,
/// jumps at the midpoints between consecutive level points.
Datum staircase(const Datum& d, double delta);

}  // namespace bfront
