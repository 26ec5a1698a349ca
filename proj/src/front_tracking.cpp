#include "bfront/front_tracking.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace bfront {

namespace {

constexpr double kTimeTol = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double position_tol(double x) { return 1e-12 * (1.0 + std::abs(x)); }

Wave non_physical(const SystemDef& sys, const State& left, const State& right) {
  Wave w;
  w.kind = WaveKind::NonPhysical;
  w.family = sys.dim;  // faster than every physical family
  w.left = left;
  w.right = right;
  w.speed = w.speed_right = sys.np_speed;
  w.strength = (right - left).norm();
  return w;
}

// A single front of family k and strength s; rarefaction fronts travel at
// the characteristic speed of their right state.
Wave front_wave(const SystemDef& sys, const State& left, int k, double s,
                const WaveCurveOptions& curve) {
  Wave w = make_wave(sys, left, k, s, curve);
  if (w.kind == WaveKind::Rarefaction) w.speed = w.speed_right;
  return w;
}

}  // namespace

const char* to_string(InteractionType type) {
  switch (type) {
    case InteractionType::FrontFront: return "front-front";
    case InteractionType::BoundaryHit: return "boundary-hit";
    case InteractionType::DatumJump: return "datum-jump";
  }
  return "?";
}

double Front::size() const {
  return non_physical() ? (wave.right - wave.left).norm() : std::abs(wave.strength);
}

double BoundaryState::xi_k() const {
  return boundary_wave ? boundary_wave->strength : xi;
}

double FTState::rho() const {
  return opts.rho > 0 ? opts.rho : opts.delta * opts.delta * opts.delta;
}

double FTState::remaining_datum_variation() const {
  double tv = 0.0;
  State prev = bdry.vb;
  for (std::size_t i = next_jump; i < datum_jumps.size(); ++i) {
    tv += (datum_jumps[i].second - prev).norm();
    prev = datum_jumps[i].second;
  }
  return tv;
}

double FTState::total_variation() const {
  double tv = 0.0;
  for (const Front& f : fronts) tv += (f.wave.right - f.wave.left).norm();
  return tv;
}

State FTState::leftmost_state() const {
  if (!fronts.empty()) return fronts.front().wave.left;
  return far_right;
}

// ---------------------------------------------------------------------------

double initial_data_size(const Datum& v0, const Datum& vb) {
  return v0.total_variation() + vb.total_variation() + (v0(0.0) - vb(0.0)).norm();
}

std::pair<Datum, Datum> quantize_data(const SystemDef& sys, const Datum& v0, const Datum& vb,
                                      double delta, bool enforce_guard, double guard) {
  if (!(delta > 0.0)) throw Error(ErrorKind::InvalidArgument, "delta must be positive");
  const double size = initial_data_size(v0, vb);
  const double cap = guard > 0 ? guard : sys.s_max;
  if (enforce_guard && size > cap) {
    throw Error(ErrorKind::SmallDataGuard,
                "small-data guard: data size " + std::to_string(size) + " exceeds " +
                    std::to_string(cap));
  }
  return {staircase(v0, delta), staircase(vb, delta)};
}

std::vector<Front> make_fronts(const SystemDef& sys, const Wave& wave, double t, double x,
                               double delta) {
  std::vector<Front> out;
  auto push = [&](Wave w) {
    Front f;
    f.t0 = t;
    f.x0 = x;
    if (w.kind == WaveKind::Rarefaction) w.speed = w.speed_right;
    f.speed = w.speed;
    f.wave = std::move(w);
    out.push_back(std::move(f));
  };
  if (wave.kind == WaveKind::Rarefaction && wave.strength > delta) {
    for (Wave& piece : discretize_rarefaction(sys, wave, delta)) push(std::move(piece));
  } else {
    push(wave);
  }
  return out;
}

namespace {

void assign_seq(FTState& s, std::vector<Front>& fronts) {
  for (Front& f : fronts) f.seq = s.next_seq++;
}

void close_front(FTState& s, const Front& f) {
  s.closed.push_back({f.t0, s.t, f.x0, f.speed, f.wave});
}

std::vector<Front> fan_fronts(FTState& s, const RiemannFan& fan, double x) {
  std::vector<Front> out;
  for (const Wave& w : fan.waves) {
    auto part = make_fronts(*s.sys, w, s.t, x, s.opts.delta);
    out.insert(out.end(), part.begin(), part.end());
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Front& a, const Front& b) { return a.speed < b.speed; });
  assign_seq(s, out);
  return out;
}

void set_boundary(FTState& s, const BoundaryFan& fan, const State& vb) {
  s.bdry.vb = vb;
  s.bdry.trace = fan.trace;
  s.bdry.xi = fan.xi;
  // A stable layer still carries a component along the characteristic
  // family; it turns into an outgoing wave once the layer detaches.
  if (fan.branch == BoundaryBranch::StableCharacteristic && s.boundary_family >= 0 &&
      !fan.layer.w.empty()) {
    const EigenDecomposition e = eigen_structure(*s.sys, fan.sub_trace);
    s.bdry.xi = e.left.row(s.boundary_family).dot(fan.layer.w.front() - fan.sub_trace);
  }
  s.bdry.boundary_wave = fan.boundary_wave;
  s.bdry.branch = fan.branch;
}

std::vector<Front> boundary_fronts(FTState& s, const BoundaryFan& fan) {
  RiemannFan rf;
  rf.waves = fan.waves;
  return fan_fronts(s, rf, 0.0);
}

void check_caps(const FTState& s) {
  if (static_cast<long>(s.fronts.size()) > s.opts.max_fronts) {
    throw Error(ErrorKind::FrontExplosion,
                "front explosion: " + std::to_string(s.fronts.size()) + " fronts at t = " +
                    std::to_string(s.t));
  }
}

}  // namespace

FTState initial_state(const SystemDef& sys, const Datum& v0, const Datum& vb,
                      const FrontTrackingOptions& opts) {
  FTState s;
  s.sys = &sys;
  s.opts = opts;
  s.t = 0.0;
  Datum q0, qb;
  if (opts.boundary) {
    std::tie(q0, qb) = quantize_data(sys, v0, vb, opts.delta, opts.enforce_guard, opts.guard);
  } else {
    const double size = v0.total_variation();
    const double cap = opts.guard > 0 ? opts.guard : sys.s_max;
    if (opts.enforce_guard && size > cap) {
      throw Error(ErrorKind::SmallDataGuard, "small-data guard: data size " +
                                                 std::to_string(size) + " exceeds " +
                                                 std::to_string(cap));
    }
    q0 = staircase(v0, opts.delta);
  }
  for (const State& v : q0.values) sys.require_in_ball(v, "initial datum");
  s.far_right = q0.values.back();
  s.far_left = q0.values.front();
  s.boundary_family = classify_boundary_field(sys, sys.reference).value_or(-1);

  if (opts.boundary) {
    for (const State& v : qb.values) sys.require_in_ball(v, "boundary datum");
    for (std::size_t i = 0; i < qb.breaks.size(); ++i) {
      if (qb.breaks[i] > 0.0) s.datum_jumps.emplace_back(qb.breaks[i], qb.values[i + 1]);
    }
    const State vb0 = qb(0.0);
    const State inner = q0(0.0);
    const BoundaryFan fan = solve_boundary_riemann(sys, inner, vb0, opts.boundary_riemann);
    set_boundary(s, fan, vb0);
    auto fr = boundary_fronts(s, fan);
    s.fronts.insert(s.fronts.end(), fr.begin(), fr.end());
  }
  for (std::size_t i = 0; i < q0.breaks.size(); ++i) {
    const double x = q0.breaks[i];
    if (opts.boundary && x <= 0.0) continue;
    const RiemannFan fan = solve_riemann(sys, q0.values[i], q0.values[i + 1], opts.boundary_riemann.riemann);
    auto fr = fan_fronts(s, fan, x);
    s.fronts.insert(s.fronts.end(), fr.begin(), fr.end());
  }
  check_caps(s);
  return s;
}

void advance(FTState& state, double t) { state.t = t; }

Event next_event(const FTState& s) {
  Event best;
  best.t = kInf;
  auto better = [&](double t, double x, long seq, long best_seq) {
    if (t < best.t - kTimeTol) return true;
    if (t > best.t + kTimeTol) return false;
    if (x < best.x - position_tol(x)) return true;
    if (x > best.x + position_tol(x)) return false;
    return seq < best_seq;
  };
  long best_seq = std::numeric_limits<long>::max();
  const int n = static_cast<int>(s.fronts.size());
  for (int i = 0; i + 1 < n; ++i) {
    const Front& a = s.fronts[i];
    const Front& b = s.fronts[i + 1];
    if (a.speed <= b.speed) continue;
    const double gap = std::max(0.0, b.position(s.t) - a.position(s.t));
    const double t = s.t + gap / (a.speed - b.speed);
    const double x = a.position(t);
    if (better(t, x, std::min(a.seq, b.seq), best_seq)) {
      best = {EventKind::Collision, t, x, {i, i + 1}};
      best_seq = std::min(a.seq, b.seq);
    }
  }
  if (s.opts.boundary && n > 0 && s.fronts[0].speed < 0.0) {
    const Front& f = s.fronts[0];
    const double t = s.t + std::max(0.0, f.position(s.t)) / (-f.speed);
    if (better(t, 0.0, f.seq, best_seq)) {
      best = {EventKind::BoundaryHit, t, 0.0, {0}};
      best_seq = f.seq;
    }
  }
  if (s.next_jump < s.datum_jumps.size()) {
    const double t = std::max(s.t, s.datum_jumps[s.next_jump].first);
    if (better(t, 0.0, -1, best_seq)) {
      best = {EventKind::DatumJump, t, 0.0, {}};
      best_seq = -1;
    }
  }
  if (best.t == kInf) best.kind = EventKind::None;
  return best;
}

// ---------------------------------------------------------------------------

GlimmSnapshot glimm_functional(const FTState& s) {
  GlimmSnapshot g;
  const int families = s.sys->dim + 1;  // NP fronts last
  std::vector<double> all(families, 0.0), shocks(families, 0.0);
  for (const Front& f : s.fronts) {
    const double a = f.size();
    const int fam = std::clamp(f.wave.family, 0, families - 1);
    g.V += a;
    g.strength += a;
    if (f.speed < 0.0 && s.opts.boundary) g.Qb += s.opts.weight_boundary * a;
    // Approaching pairs with f on the right.
    double left_sum = 0.0;
    for (int j = fam + 1; j < families; ++j) left_sum += all[j];
    if (!f.non_physical() && s.sys->kinds[fam] == FieldKind::GenuinelyNonlinear) {
      left_sum += f.wave.kind == WaveKind::Shock ? all[fam] : shocks[fam];
    }
    g.Q += a * left_sum;
    all[fam] += a;
    if (f.wave.kind == WaveKind::Shock) shocks[fam] += a;
  }
  if (s.opts.boundary) {
    const double b = std::abs(s.bdry.xi_k());
    g.strength += b;
    g.V += s.opts.weight_boundary * (b + s.remaining_datum_variation());
  }
  return g;
}

namespace {

InteractionRecord begin_record(const FTState& s, InteractionType type, double x) {
  InteractionRecord r;
  r.t = s.t;
  r.x = x;
  r.type = type;
  r.before = glimm_functional(s);
  return r;
}

void finish_record(const FTState& s, InteractionRecord& r) {
  r.after = glimm_functional(s);
  r.delta_v = r.after.strength - r.before.strength;
}

}  // namespace

InteractionRecord resolve_interior(FTState& s, int first, int last) {
  const SystemDef& sys = *s.sys;
  double x = 0.0;
  for (int i = first; i <= last; ++i) x += s.fronts[i].position(s.t);
  x /= (last - first + 1);
  if (s.opts.boundary) x = std::max(x, 0.0);
  InteractionRecord rec = begin_record(s, InteractionType::FrontFront, x);
  for (int i = first; i <= last; ++i) rec.incoming.push_back(
      s.fronts[i].non_physical() ? s.fronts[i].size() : s.fronts[i].wave.strength);

  const State vl = s.fronts[first].wave.left;
  const State vr = s.fronts[last].wave.right;
  const WaveCurveOptions& curve = s.opts.boundary_riemann.riemann.curve;
  std::vector<Front> out;

  bool simplified = false;
  if (last == first + 1) {
    const Front& a = s.fronts[first];
    const Front& b = s.fronts[last];
    simplified = a.non_physical() || b.non_physical() || a.size() * b.size() < s.rho();
    if (simplified) {
      std::vector<Wave> waves;
      State w = vl;
      if (a.non_physical() && !b.non_physical()) {
        waves.push_back(front_wave(sys, w, b.wave.family, b.wave.strength, curve));
      } else if (!a.non_physical() && !b.non_physical()) {
        if (a.wave.family == b.wave.family) {
          waves.push_back(front_wave(sys, w, a.wave.family, a.wave.strength + b.wave.strength, curve));
        } else {
          waves.push_back(front_wave(sys, w, b.wave.family, b.wave.strength, curve));
          waves.push_back(front_wave(sys, waves.back().right, a.wave.family, a.wave.strength, curve));
        }
      }
      if (!waves.empty()) w = waves.back().right;
      if ((w - vr).norm() > 0.0) waves.push_back(non_physical(sys, w, vr));
      for (Wave& wv : waves) {
        Front f;
        f.t0 = s.t;
        f.x0 = x;
        f.speed = wv.speed;
        f.wave = std::move(wv);
        out.push_back(std::move(f));
      }
      std::stable_sort(out.begin(), out.end(),
                       [](const Front& p, const Front& q) { return p.speed < q.speed; });
      assign_seq(s, out);
    }
  }
  if (!simplified) {
    const RiemannFan fan = solve_riemann(sys, vl, vr, s.opts.boundary_riemann.riemann);
    out = fan_fronts(s, fan, x);
  }
  rec.simplified = simplified;

  for (int i = first; i <= last; ++i) close_front(s, s.fronts[i]);
  s.fronts.erase(s.fronts.begin() + first, s.fronts.begin() + last + 1);
  s.fronts.insert(s.fronts.begin() + first, out.begin(), out.end());
  check_caps(s);
  finish_record(s, rec);
  return rec;
}

InteractionRecord resolve_boundary_hit(FTState& s, int count) {
  const SystemDef& sys = *s.sys;
  InteractionRecord rec = begin_record(s, InteractionType::BoundaryHit, 0.0);
  rec.xi_pre = s.bdry.xi_k();
  // The last front to arrive (rightmost) carries the estimate.
  double s_total = 0.0;
  for (int i = 0; i < count; ++i) {
    const Front& f = s.fronts[i];
    rec.incoming.push_back(f.non_physical() ? f.size() : f.wave.strength);
    s_total += f.size();
  }
  const Front& hit = s.fronts[count - 1];
  rec.family = hit.wave.family;
  rec.characteristic = hit.wave.family == s.boundary_family;
  rec.varsigma = hit.wave.kind == WaveKind::Rarefaction
                     ? eigen_structure(sys, hit.wave.left).values[hit.wave.family]
                     : hit.speed;
  rec.bound = s_total * (std::max(-rec.varsigma, 0.0) + std::abs(rec.xi_pre));

  const State interior = hit.wave.right;
  const BoundaryFan fan = solve_boundary_riemann(sys, interior, s.bdry.vb, s.opts.boundary_riemann);
  for (int i = 0; i < count; ++i) close_front(s, s.fronts[i]);
  s.fronts.erase(s.fronts.begin(), s.fronts.begin() + count);
  set_boundary(s, fan, s.bdry.vb);
  auto out = boundary_fronts(s, fan);
  s.fronts.insert(s.fronts.begin(), out.begin(), out.end());
  check_caps(s);
  finish_record(s, rec);
  return rec;
}

InteractionRecord resolve_datum_jump(FTState& s) {
  InteractionRecord rec = begin_record(s, InteractionType::DatumJump, 0.0);
  rec.xi_pre = s.bdry.xi_k();
  const State vb = s.datum_jumps[s.next_jump].second;
  ++s.next_jump;
  const State jump = vb - s.bdry.vb;
  rec.incoming.push_back(jump.norm());
  if (jump.norm() == 0.0) {
    rec.no_op = true;
    finish_record(s, rec);
    return rec;
  }
  const State interior = s.bdry.trace;
  const BoundaryFan fan = solve_boundary_riemann(*s.sys, interior, vb, s.opts.boundary_riemann);
  set_boundary(s, fan, vb);
  auto out = boundary_fronts(s, fan);
  s.fronts.insert(s.fronts.begin(), out.begin(), out.end());
  check_caps(s);
  finish_record(s, rec);
  return rec;
}

// ---------------------------------------------------------------------------

namespace {

void push_trace(const FTState& s, Trajectory& traj) {
  if (!s.opts.boundary) return;
  traj.traces.push_back({s.t, s.bdry.vb, s.bdry.trace, s.bdry.xi_k(), s.bdry.branch});
}

void push_functional(const FTState& s, Trajectory& traj) {
  const double tv = s.total_variation();
  traj.sup_tv = std::max(traj.sup_tv, tv);
  traj.max_fronts_seen = std::max<long>(traj.max_fronts_seen, static_cast<long>(s.fronts.size()));
  traj.functional.push_back({s.t, glimm_functional(s), tv, static_cast<int>(s.fronts.size())});
}

// Processes everything happening at the current time s.t.
void process_instant(FTState& s, Trajectory& traj) {
  for (int guard = 0; guard < 100000; ++guard) {
    bool changed = false;
    // Boundary hits first: leading fronts at x = 0 moving left.
    if (s.opts.boundary) {
      int count = 0;
      while (count < static_cast<int>(s.fronts.size()) && s.fronts[count].speed < 0.0 &&
             s.fronts[count].position(s.t) <= position_tol(0.0)) {
        ++count;
      }
      if (count > 0) {
        traj.records.push_back(resolve_boundary_hit(s, count));
        push_trace(s, traj);
        changed = true;
      }
    }
    if (!changed && s.next_jump < s.datum_jumps.size() &&
        s.datum_jumps[s.next_jump].first <= s.t + kTimeTol) {
      traj.records.push_back(resolve_datum_jump(s));
      push_trace(s, traj);
      changed = true;
    }
    if (!changed) {
      // Leftmost cluster of approaching fronts at a common point.
      const int n = static_cast<int>(s.fronts.size());
      for (int i = 0; i + 1 < n && !changed; ++i) {
        auto meets = [&](int j) {
          const Front& a = s.fronts[j];
          const Front& b = s.fronts[j + 1];
          return a.speed > b.speed &&
                 b.position(s.t) - a.position(s.t) <= position_tol(a.position(s.t));
        };
        if (!meets(i)) continue;
        int last = i + 1;
        while (last + 1 < n && meets(last)) ++last;
        traj.records.push_back(resolve_interior(s, i, last));
        changed = true;
      }
    }
    if (!changed) return;
    ++traj.events;
    push_functional(s, traj);
    if (traj.events > s.opts.max_events) {
      throw Error(ErrorKind::FrontExplosion,
                  "front explosion: more than " + std::to_string(s.opts.max_events) + " events");
    }
    const double cap = s.opts.tv_cap_factor * std::max(traj.initial_size, s.opts.delta);
    if (s.total_variation() > cap) {
      throw Error(ErrorKind::VariationBlowUp,
                  "variation blow-up: total variation " + std::to_string(s.total_variation()) +
                      " exceeds " + std::to_string(cap) + " at t = " + std::to_string(s.t));
    }
  }
}

}  // namespace

Trajectory run(const SystemDef& sys, const Datum& v0, const Datum& vb,
               const FrontTrackingOptions& opts) {
  Trajectory traj;
  traj.boundary = opts.boundary;
  traj.t_end = opts.t_end;
  traj.delta = opts.delta;
  traj.initial_size = opts.boundary ? initial_data_size(v0, vb) : v0.total_variation();
  FTState s;
  try {
    s = initial_state(sys, v0, vb, opts);
    traj.far_left = s.far_left;
    traj.far_right = s.far_right;
    push_trace(s, traj);
    push_functional(s, traj);
    process_instant(s, traj);
    while (true) {
      const Event e = next_event(s);
      if (e.kind == EventKind::None || e.t > opts.t_end) break;
      advance(s, e.t);
      process_instant(s, traj);
    }
    advance(s, opts.t_end);
  } catch (const Error& e) {
    traj.ok = false;
    traj.error_kind = e.kind();
    traj.error = e.what();
    if (s.sys == nullptr) return traj;
  }
  for (const Front& f : s.fronts) close_front(s, f);
  traj.segments = std::move(s.closed);
  const double slack = 10.0 * opts.delta * opts.delta;
  traj.c0 = opts.c0 > 0 ? opts.c0 : calibrate_c0(traj.records, slack);
  return traj;
}

double monotone_fraction(const std::vector<InteractionRecord>& records, double c0, double slack) {
  if (records.empty()) return 1.0;
  long good = 0;
  for (const auto& r : records) good += r.after.upsilon(c0) - r.before.upsilon(c0) <= slack;
  return static_cast<double>(good) / static_cast<double>(records.size());
}

double calibrate_c0(const std::vector<InteractionRecord>& records, double slack) {
  double best = 1.0;
  double best_fraction = -1.0;
  for (int p = 0; p <= 30; ++p) {
    const double c0 = std::ldexp(1.0, p);
    const double fr = monotone_fraction(records, c0, slack);
    if (fr >= 1.0) return c0;
    if (fr > best_fraction) {
      best_fraction = fr;
      best = c0;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<double, const FrontSegment*>> Trajectory::fronts_at(double t) const {
  std::vector<std::pair<double, const FrontSegment*>> out;
  for (const FrontSegment& seg : segments) {
    const bool alive = seg.t0 <= t && (t < seg.t1 || (seg.t1 >= t_end && t <= seg.t1));
    if (alive) out.emplace_back(seg.x0 + seg.speed * (t - seg.t0), &seg);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second->speed < b.second->speed;
  });
  return out;
}

std::vector<ProfilePiece> Trajectory::profile(double t, double x_min, double x_max) const {
  std::vector<ProfilePiece> pieces;
  const auto fr = fronts_at(t);
  State current = fr.empty() ? far_right : fr.front().second->wave.left;
  double x = x_min;
  for (const auto& [pos, seg] : fr) {
    if (pos <= x_min) {
      current = seg->wave.right;
      continue;
    }
    if (pos >= x_max) break;
    if (pos > x) pieces.push_back({x, pos, current});
    x = pos;
    current = seg->wave.right;
  }
  if (x_max > x) pieces.push_back({x, x_max, current});
  return pieces;
}

State Trajectory::sample(double t, double x) const {
  const auto fr = fronts_at(t);
  State current = fr.empty() ? far_right : fr.front().second->wave.left;
  for (const auto& [pos, seg] : fr) {
    if (pos > x) break;
    current = seg->wave.right;
  }
  return current;
}

const TracePoint& Trajectory::trace_at(double t) const {
  if (traces.empty()) throw Error(ErrorKind::InvalidArgument, "trajectory has no boundary");
  std::size_t i = 0;
  while (i + 1 < traces.size() && traces[i + 1].t <= t) ++i;
  return traces[i];
}

// ---------------------------------------------------------------------------

namespace {

double bump(double z) {
  if (std::abs(z) >= 1.0) return 0.0;
  const double a = 1.0 - z * z;
  return a * a * a * a;
}

double bump_prime(double z) {
  if (std::abs(z) >= 1.0) return 0.0;
  const double a = 1.0 - z * z;
  return -8.0 * z * a * a * a;
}

constexpr std::array<double, 8> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

// Integral over the support of phi of a(v) phi_t + b(v) phi_x, where the
// integrand pair is given per state.
template <typename Pair>
Eigen::VectorXd space_time_integral(const Trajectory& traj, const TestFunction& phi, int dim,
                                    Pair pair) {
  if (!traj.ok) throw Error(ErrorKind::InvalidArgument, "residual of a failed run: " + traj.error);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
  const int t_panels = 64;
  const double ta = phi.tc - phi.rt, tb = phi.tc + phi.rt;
  const double xa = phi.xc - phi.rx, xb = phi.xc + phi.rx;
  for (int p = 0; p < t_panels; ++p) {
    const double t0 = ta + (tb - ta) * p / t_panels;
    const double t1 = ta + (tb - ta) * (p + 1) / t_panels;
    for (int q = 0; q < 8; ++q) {
      const double t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * kGaussNodes[q];
      const double wt = 0.5 * (t1 - t0) * kGaussWeights[q];
      for (const ProfilePiece& piece : traj.profile(t, xa, xb)) {
        const auto [a, b] = pair(piece.state);
        // Split long pieces so the quadrature resolves the bump.
        const int sub = std::max(1, static_cast<int>(std::ceil(8.0 * (piece.x_right - piece.x_left) / phi.rx)));
        for (int m = 0; m < sub; ++m) {
          const double x0 = piece.x_left + (piece.x_right - piece.x_left) * m / sub;
          const double x1 = piece.x_left + (piece.x_right - piece.x_left) * (m + 1) / sub;
          double it = 0.0, ix = 0.0;
          for (int r = 0; r < 8; ++r) {
            const double x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * kGaussNodes[r];
            const double wx = 0.5 * (x1 - x0) * kGaussWeights[r];
            it += wx * phi.dt(t, x);
            ix += wx * phi.dx(t, x);
          }
          total += wt * (it * a + ix * b);
        }
      }
    }
  }
  return total;
}

}  // namespace

double TestFunction::value(double t, double x) const {
  return amplitude * bump((t - tc) / rt) * bump((x - xc) / rx);
}

double TestFunction::dt(double t, double x) const {
  return amplitude * bump_prime((t - tc) / rt) / rt * bump((x - xc) / rx);
}

double TestFunction::dx(double t, double x) const {
  return amplitude * bump((t - tc) / rt) * bump_prime((x - xc) / rx) / rx;
}

State weak_residual(const SystemDef& sys, const Trajectory& traj, const TestFunction& phi) {
  return space_time_integral(traj, phi, sys.dim, [&](const State& v) {
    return std::pair<State, State>(sys.g(v), sys.f(v));
  });
}

double entropy_residual(const SystemDef& sys, const Trajectory& traj, const TestFunction& phi) {
  if (!sys.entropy || !sys.entropy_flux) {
    throw Error(ErrorKind::InvalidArgument, "system " + sys.name + " has no entropy pair");
  }
  return space_time_integral(traj, phi, 1, [&](const State& v) {
           State a(1), b(1);
           a[0] = sys.entropy(v);
           b[0] = sys.entropy_flux(v);
           return std::pair<State, State>(a, b);
         })[0];
}

double l1_distance(const Trajectory& traj, double t, double x_min, double x_max,
                   const std::function<State(double)>& reference,
                   const std::vector<double>& breaks, double panel) {
  double total = 0.0;
  for (const ProfilePiece& piece : traj.profile(t, x_min, x_max)) {
    std::vector<double> cuts = {piece.x_left, piece.x_right};
    for (double b : breaks)
      if (b > piece.x_left && b < piece.x_right) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double a = cuts[c], b = cuts[c + 1];
      const int sub = std::max(1, static_cast<int>(std::ceil((b - a) / panel)));
      for (int m = 0; m < sub; ++m) {
        const double x0 = a + (b - a) * m / sub;
        const double x1 = a + (b - a) * (m + 1) / sub;
        for (int r = 0; r < 8; ++r) {
          const double x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * kGaussNodes[r];
          total += 0.5 * (x1 - x0) * kGaussWeights[r] * (piece.state - reference(x)).lpNorm<1>();
        }
      }
    }
  }
  return total;
}

}  // namespace bfront
