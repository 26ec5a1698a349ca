#include "bfront/data.hpp"

#include <algorithm>
#include <cmath>

namespace bfront {

namespace {

constexpr int kProfileSamples = 4096;

}  // namespace

Datum Datum::constant(const State& v) {
  Datum d;
  d.values = {v};
  return d;
}

Datum Datum::step(double at, const State& left, const State& right) {
  Datum d;
  d.breaks = {at};
  d.values = {left, right};
  return d;
}

int Datum::dim() const {
  if (!values.empty()) return static_cast<int>(values.front().size());
  return profile ? static_cast<int>(profile(a).size()) : 0;
}

State Datum::operator()(double s) const {
  if (profile) return profile(std::clamp(s, a, b));
  const auto it = std::upper_bound(breaks.begin(), breaks.end(), s);
  return values[static_cast<std::size_t>(it - breaks.begin())];
}

double Datum::total_variation() const {
  double tv = 0.0;
  if (profile) {
    State prev = profile(a);
    for (int i = 1; i <= kProfileSamples; ++i) {
      const State cur = profile(a + (b - a) * i / kProfileSamples);
      tv += (cur - prev).norm();
      prev = cur;
    }
    return tv;
  }
  for (std::size_t i = 1; i < values.size(); ++i) tv += (values[i] - values[i - 1]).norm();
  return tv;
}

Datum staircase(const Datum& d, double delta) {
  if (d.piecewise_constant()) return d;
  // Arc length along a fine sampling of the profile.
  std::vector<double> xs(kProfileSamples + 1), arc(kProfileSamples + 1, 0.0);
  std::vector<State> vs(kProfileSamples + 1);
  for (int i = 0; i <= kProfileSamples; ++i) {
    xs[i] = d.a + (d.b - d.a) * i / kProfileSamples;
    vs[i] = d.profile(xs[i]);
    if (i > 0) arc[i] = arc[i - 1] + (vs[i] - vs[i - 1]).norm();
  }
  const double tv = arc.back();
  Datum out;
  if (tv == 0.0) {
    out.values = {vs.front()};
    return out;
  }
  const int m = std::max(1, static_cast<int>(std::ceil(tv / delta - 1e-12)));
  std::vector<double> level_x(m + 1);
  out.values.resize(m + 1);
  for (int j = 0; j <= m; ++j) {
    const double target = tv * j / m;
    const auto it = std::lower_bound(arc.begin(), arc.end(), target);
    std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - arc.begin()), kProfileSamples);
    double x = xs[i];
    State v = vs[i];
    if (i > 0 && arc[i] > arc[i - 1]) {
      const double th = (target - arc[i - 1]) / (arc[i] - arc[i - 1]);
      x = xs[i - 1] + th * (xs[i] - xs[i - 1]);
      v = vs[i - 1] + th * (vs[i] - vs[i - 1]);
    }
    level_x[j] = x;
    out.values[j] = v;
  }
  out.values.front() = vs.front();
  out.values.back() = vs.back();
  for (int j = 0; j < m; ++j) out.breaks.push_back(0.5 * (level_x[j] + level_x[j + 1]));
  return out;
}

}  // namespace bfront
