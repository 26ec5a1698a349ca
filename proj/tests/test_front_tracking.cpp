#include "doctest.h"

#include "bfront/front_tracking.hpp"
#include "fan_oracle.hpp"

#include <cmath>
#include <random>

using namespace bfront;

namespace {

State vec(std::initializer_list<double> xs) {
  State v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

Front front_at(double x, double speed, long seq) {
  Front f;
  f.x0 = x;
  f.speed = speed;
  f.seq = seq;
  f.wave.kind = WaveKind::Contact;
  return f;
}

FTState bare_state(const SystemDef& sys, bool boundary = true) {
  FTState s;
  s.sys = &sys;
  s.opts.boundary = boundary;
  s.far_right = s.far_left = sys.reference;
  s.bdry.vb = s.bdry.trace = sys.reference;
  return s;
}

Front physical(const SystemDef& sys, const State& left, int k, double s, double x, long seq) {
  Front f;
  f.wave = make_wave(sys, left, k, s);
  if (f.wave.kind == WaveKind::Rarefaction) f.wave.speed = f.wave.speed_right;
  f.speed = f.wave.speed;
  f.x0 = x;
  f.seq = seq;
  return f;
}

// Every shock satisfies Rankine-Hugoniot and the Lax inequalities, every
// contact travels at its characteristic speed.
void check_fronts_admissible(const SystemDef& sys, const Trajectory& traj, double t) {
  for (const auto& [x, seg] : traj.fronts_at(t)) {
    const Wave& w = seg->wave;
    if (w.kind == WaveKind::Shock) {
      const State jump = sys.f(w.right) - sys.f(w.left) - seg->speed * (sys.g(w.right) - sys.g(w.left));
      CHECK(max_norm(jump) <= 1e-9);
      CHECK(eigen_structure(sys, w.left).values[w.family] > seg->speed);
      CHECK(eigen_structure(sys, w.right).values[w.family] < seg->speed);
    } else if (w.kind == WaveKind::Contact) {
      CHECK(std::abs(eigen_structure(sys, w.left).values[w.family] - seg->speed) <= 1e-9);
    }
  }
}

Datum random_steps(const State& base, double amplitude, int pieces, double spacing,
                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Datum d;
  for (int i = 0; i < pieces; ++i) {
    State v = base;
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] += amplitude * u(rng);
    if (i > 0) d.breaks.push_back(spacing * i);
    d.values.push_back(v);
  }
  return d;
}

}  // namespace

TEST_CASE("quantize_data") {
  const auto sys = make_burgers(0.0, 0.0, 1.0);
  SUBCASE("constant data unchanged") {
    const auto [q0, qb] = quantize_data(*sys, Datum::constant(vec({0.1})), Datum::constant(vec({0.1})), 0.05);
    CHECK(q0.breaks.empty());
    CHECK(qb.breaks.empty());
    CHECK(q0.values[0][0] == 0.1);
  }
  SUBCASE("ramp becomes an equal-area staircase") {
    Datum ramp;
    ramp.profile = [](double x) { return vec({std::min(x, 0.1)}); };
    ramp.a = 0.0;
    ramp.b = 0.1;
    const auto [q0, qb] = quantize_data(*sys, ramp, Datum::constant(vec({0.0})), 0.05);
    REQUIRE(q0.breaks.size() == 2);
    CHECK(q0.total_variation() == doctest::Approx(0.1).epsilon(1e-9));
    // Equal areas: the staircase integrates to the ramp's integral on [0, 0.1].
    double area = 0.0;
    double x = 0.0;
    for (std::size_t i = 0; i < q0.values.size(); ++i) {
      const double right = i < q0.breaks.size() ? q0.breaks[i] : 0.1;
      area += q0.values[i][0] * (right - x);
      x = right;
    }
    CHECK(area == doctest::Approx(0.005).epsilon(1e-6));
    CHECK(q0.breaks[0] == doctest::Approx(0.025).epsilon(1e-6));
    CHECK(q0.breaks[1] == doctest::Approx(0.075).epsilon(1e-6));
  }
  SUBCASE("one jump unchanged") {
    const Datum d = Datum::step(0.3, vec({0.0}), vec({0.05}));
    const auto [q0, qb] = quantize_data(*sys, d, Datum::constant(vec({0.0})), 0.01);
    CHECK(q0.breaks == d.breaks);
  }
  SUBCASE("guard") {
    const Datum d = Datum::step(0.3, vec({0.0}), vec({0.5}));
    try {
      quantize_data(*sys, d, Datum::constant(vec({0.0})), 0.01);
      FAIL("expected the small-data guard");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SmallDataGuard);
    }
    CHECK_NOTHROW(quantize_data(*sys, d, Datum::constant(vec({0.0})), 0.01, false));
  }
}

TEST_CASE("next_event") {
  const auto sys = make_burgers();
  FTState s = bare_state(*sys);
  s.t = 2.0;
  SUBCASE("collision") {
    Front a = front_at(1.0, 1.0, 0), b = front_at(2.0, -1.0, 1);
    a.t0 = b.t0 = 2.0;
    s.fronts = {a, b};
    const Event e = next_event(s);
    CHECK(e.kind == EventKind::Collision);
    CHECK(e.t == doctest::Approx(2.5));
    CHECK(e.x == doctest::Approx(1.5));
  }
  SUBCASE("boundary hit") {
    Front a = front_at(1.0, -2.0, 0);
    a.t0 = 2.0;
    s.fronts = {a};
    const Event e = next_event(s);
    CHECK(e.kind == EventKind::BoundaryHit);
    CHECK(e.t == doctest::Approx(2.5));
  }
  SUBCASE("none") { CHECK(next_event(s).kind == EventKind::None); }
  SUBCASE("ties go to the smaller position") {
    Front a = front_at(1.0, 1.0, 5), b = front_at(2.0, -1.0, 6);
    Front c = front_at(4.0, 1.0, 1), d = front_at(5.0, -1.0, 2);
    for (Front* f : {&a, &b, &c, &d}) f->t0 = 2.0;
    s.fronts = {a, b, c, d};
    const Event e = next_event(s);
    CHECK(e.x == doctest::Approx(1.5));
    CHECK(e.participants == std::vector<int>{0, 1});
  }
  SUBCASE("datum jump") {
    s.datum_jumps = {{3.0, vec({0.1})}};
    const Event e = next_event(s);
    CHECK(e.kind == EventKind::DatumJump);
    CHECK(e.t == 3.0);
  }
}

TEST_CASE("resolve_interior") {
  const auto sys = make_p_system();
  const State v0 = sys->reference;
  FTState s = bare_state(*sys, false);
  s.opts.delta = 0.01;
  SUBCASE("two 1-shocks merge like the Riemann problem of the extreme states") {
    Front a = physical(*sys, v0, 0, -0.02, 1.0, 0);
    Front b = physical(*sys, a.wave.right, 0, -0.03, 1.0, 1);
    s.fronts = {a, b};
    const InteractionRecord r = resolve_interior(s, 0, 1);
    CHECK_FALSE(r.simplified);
    const RiemannFan fan = solve_riemann(*sys, v0, b.wave.right);
    REQUIRE(s.fronts.size() == fan.waves.size());
    for (std::size_t i = 0; i < fan.waves.size(); ++i) {
      CHECK(s.fronts[i].wave.family == fan.waves[i].family);
      CHECK(s.fronts[i].wave.strength == doctest::Approx(fan.waves[i].strength).epsilon(1e-9));
    }
    CHECK(s.fronts[0].wave.kind == WaveKind::Shock);
    CHECK(s.fronts[0].wave.strength == doctest::Approx(-0.05).epsilon(0.05));
    CHECK(max_norm(s.fronts.back().wave.right - b.wave.right) == 0.0);
  }
  SUBCASE("shock crossing a non-physical front") {
    Front np;
    np.wave.kind = WaveKind::NonPhysical;
    np.wave.family = sys->dim;
    np.wave.left = v0;
    np.wave.right = v0 + vec({1e-7, -1e-7});
    np.speed = np.wave.speed = sys->np_speed;
    np.x0 = 1.0;
    Front b = physical(*sys, np.wave.right, 0, -0.03, 1.0, 1);
    s.fronts = {np, b};
    const InteractionRecord r = resolve_interior(s, 0, 1);
    CHECK(r.simplified);
    REQUIRE(s.fronts.size() == 2);
    CHECK(s.fronts[0].wave.family == 0);
    CHECK(s.fronts[0].wave.strength == -0.03);
    CHECK(max_norm(s.fronts[0].wave.left - v0) == 0.0);
    CHECK(s.fronts[1].non_physical());
    CHECK(s.fronts[1].speed == sys->np_speed);
    CHECK(s.fronts[1].size() <= 1e-6);
    CHECK(max_norm(s.fronts[1].wave.right - b.wave.right) == 0.0);
  }
  SUBCASE("weak pair goes through the simplified solver") {
    s.opts.delta = 0.05;  // rho = 1.25e-4
    Front a = physical(*sys, v0, 1, -0.01, 1.0, 0);
    Front b = physical(*sys, a.wave.right, 0, -0.005, 1.0, 1);
    s.fronts = {a, b};
    const InteractionRecord r = resolve_interior(s, 0, 1);
    CHECK(r.simplified);
    REQUIRE(s.fronts.size() == 3);
    CHECK(s.fronts[0].wave.family == 0);
    CHECK(s.fronts[0].wave.strength == -0.005);
    CHECK(s.fronts[1].wave.family == 1);
    CHECK(s.fronts[1].wave.strength == -0.01);
    CHECK(s.fronts[2].non_physical());
    CHECK(s.fronts[2].size() <= 10 * 0.005 * 0.01);
  }
  SUBCASE("head-on shocks: strength change is quadratic") {
    std::vector<double> ratios;
    for (const double eps : {0.01, 0.005}) {
      FTState t = bare_state(*sys, false);
      t.opts.delta = 1e-3;
      Front a = physical(*sys, v0, 1, -eps, 1.0, 0);
      Front b = physical(*sys, a.wave.right, 0, -eps, 1.0, 1);
      t.fronts = {a, b};
      const InteractionRecord r = resolve_interior(t, 0, 1);
      // Oracle: the Riemann problem of the extreme states.
      const Eigen::VectorXd str = riemann_strengths(*sys, v0, b.wave.right);
      CHECK(std::abs(r.after.strength - str.cwiseAbs().sum()) <= 1e-12);
      ratios.push_back(std::abs(r.delta_v) / (eps * eps));
    }
    CHECK(std::isfinite(ratios[0]));
    CHECK(ratios[0] <= 10.0);
    CHECK(ratios[1] / ratios[0] <= 2.0);
    CHECK(ratios[1] / ratios[0] >= 0.5);
  }
}

TEST_CASE("resolve_boundary_hit: non-characteristic linear system") {
  const Matrix A = mat2(-1, 0, 0, 1);
  const State vb = vec({0.3, 0.4});
  for (const bool identity : {true, false}) {
    const Matrix D = identity ? Matrix(Matrix::Identity(2, 2)) : mat2(1, 0, 1, 1);
    const auto sys = make_linear(A, D, vec({0, 0}), 4.0);
    FTState s = bare_state(*sys);
    s.opts.delta = 0.01;
    // Trace compatible with vb, then a 1-contact arriving from the right.
    const State trace = linear_boundary_trace({A, D, vec({0.3, 0.4}), vb}).trace;
    s.bdry.vb = vb;
    s.bdry.trace = trace;
    Front c = physical(*sys, trace, 0, 0.2, 0.0, 0);
    s.fronts = {c};
    const InteractionRecord r = resolve_boundary_hit(s, 1);
    CHECK(r.type == InteractionType::BoundaryHit);
    const LinearTrace oracle = linear_boundary_trace({A, D, c.wave.right, vb});
    CHECK(max_norm(s.bdry.trace - oracle.trace) <= 1e-8);
    if (identity) {
      CHECK(s.fronts.empty());  // absorbed, no reflection
    } else {
      REQUIRE(s.fronts.size() == 1);
      CHECK(s.fronts[0].wave.family == 1);
      CHECK(s.fronts[0].speed > 0);
    }
  }
}

TEST_CASE("resolve_datum_jump") {
  SUBCASE("no-op when the datum does not change") {
    const auto sys = make_p_system();
    FTState s = bare_state(*sys);
    s.datum_jumps = {{1.0, sys->reference}};
    s.t = 1.0;
    const InteractionRecord r = resolve_datum_jump(s);
    CHECK(r.no_op);
    CHECK(s.fronts.empty());
    CHECK(r.delta_v == 0.0);
  }
  SUBCASE("Lagrangian Euler parks a 0-speed contact at the boundary") {
    const auto sys = make_lagrangian_euler();
    FTState s = bare_state(*sys);
    s.opts.delta = 0.01;
    const State vb = sys->reference + vec({0.01, 0.005, -0.02});
    s.datum_jumps = {{0.5, vb}};
    s.t = 0.5;
    const InteractionRecord r = resolve_datum_jump(s);
    CHECK(s.bdry.branch == BoundaryBranch::ZeroSpeedContact);
    REQUIRE(s.bdry.boundary_wave.has_value());
    CHECK(s.bdry.boundary_wave->speed == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(r.after.strength - r.before.strength - r.delta_v) <= 1e-15);
    const EquivWitness w = check_equiv_D(*sys, s.bdry.trace, vb);
    CHECK(w.holds);
    for (const Front& f : s.fronts) CHECK(f.speed > 0);
  }
  SUBCASE("linear datum jump matches the linear oracle") {
    const Matrix A = mat2(-1, 0, 0, 1), D = mat2(1, 0, 1, 1);
    const auto sys = make_linear(A, D, vec({0, 0}), 4.0);
    FTState s = bare_state(*sys);
    s.datum_jumps = {{0.2, vec({1, 1})}};
    s.t = 0.2;
    resolve_datum_jump(s);
    const LinearTrace oracle = linear_boundary_trace({A, D, vec({0, 0}), vec({1, 1})});
    CHECK(max_norm(s.bdry.trace - oracle.trace) <= 1e-8);
  }
}

TEST_CASE("glimm_functional") {
  const auto sys = make_p_system();
  const State v0 = sys->reference;
  FTState s = bare_state(*sys);
  SUBCASE("empty") {
    const GlimmSnapshot g = glimm_functional(s);
    CHECK(g.upsilon(4.0) == 0.0);
  }
  SUBCASE("single shock, nothing approaching") {
    s.fronts = {physical(*sys, v0, 1, -0.1, 1.0, 0)};
    const GlimmSnapshot g = glimm_functional(s);
    CHECK(g.V == doctest::Approx(0.1));
    CHECK(g.Q == 0.0);
    CHECK(g.Qb == 0.0);
    CHECK(g.upsilon(8.0) == doctest::Approx(0.1));
  }
  SUBCASE("two approaching shocks") {
    Front a = physical(*sys, v0, 1, -0.1, 1.0, 0);
    Front b = physical(*sys, a.wave.right, 1, -0.1, 2.0, 1);
    s.fronts = {a, b};
    const GlimmSnapshot g = glimm_functional(s);
    CHECK(g.Q == doctest::Approx(0.01));
    CHECK(g.upsilon(4.0) == doctest::Approx(g.V + 4.0 * 0.01));
  }
  SUBCASE("a front moving toward the boundary enters Q_b") {
    s.fronts = {physical(*sys, v0, 0, -0.1, 1.0, 0)};
    CHECK(glimm_functional(s).Qb == doctest::Approx(2.0 * 0.1));
  }
}

TEST_CASE("run: constant data") {
  const auto sys = make_p_system();
  const Trajectory traj = run(*sys, Datum::constant(sys->reference), Datum::constant(sys->reference),
                              {.delta = 0.01, .t_end = 2.0});
  CHECK(traj.ok);
  CHECK(traj.events == 0);
  CHECK(traj.segments.empty());
  CHECK(max_norm(traj.sample(1.0, 0.5) - sys->reference) == 0.0);
}

TEST_CASE("run: pure Riemann datum matches the exact fan") {
  const auto sys = make_p_system();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int trial = 0; trial < 5; ++trial) {
    const State vl = sys->reference;
    const RiemannFan exact = compose_fan(*sys, vl, vec({u(rng), u(rng)}));
    const State vr = exact.states.back();
    std::vector<double> errors;
    for (const double delta : {1e-2, 5e-3}) {
      const Trajectory traj = run(*sys, Datum::step(3.0, vl, vr), Datum::constant(vl),
                                  {.delta = delta, .t_end = 1.0});
      REQUIRE(traj.ok);
      const oracle::TabulatedFan fan(*sys, exact);
      std::vector<double> breaks;
      for (double b : fan.breaks()) breaks.push_back(3.0 + b);
      const double err = l1_distance(traj, 1.0, 1.0, 5.0, [&](double x) { return fan(x - 3.0); }, breaks);
      CHECK(err <= 3 * delta);
      errors.push_back(err);
      check_fronts_admissible(*sys, traj, 1.0);
    }
  }
}

TEST_CASE("run: Gisclon data gives the linear trace") {
  const Matrix A = mat2(-1, 0, 0, 1);
  for (const bool identity : {true, false}) {
    const Matrix D = identity ? Matrix(Matrix::Identity(2, 2)) : mat2(1, 0, 1, 1);
    const auto sys = make_linear(A, D, vec({0, 0}), 4.0);
    const Trajectory traj = run(*sys, Datum::constant(vec({0, 0})), Datum::constant(vec({1, 1})),
                                {.delta = 0.01, .t_end = 1.0});
    REQUIRE(traj.ok);
    const State expect = identity ? vec({0, 1}) : vec({0, 1.5});
    CHECK(max_norm(traj.trace_at(0.5).trace - expect) <= 1e-8);
    CHECK(max_norm(traj.sample(0.5, 0.25) - expect) <= 1e-8);
    CHECK(max_norm(traj.sample(0.5, 0.75) - vec({0, 0})) <= 1e-12);
  }
}

TEST_CASE("run: random half-line p-system data") {
  const auto sys = make_p_system();
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 4; ++trial) {
    const Datum v0 = random_steps(sys->reference, 0.004, 4, 0.3, rng);
    const Datum vb = random_steps(sys->reference, 0.004, 3, 0.4, rng);
    const double size = initial_data_size(v0, vb);
    const Trajectory traj = run(*sys, v0, vb, {.delta = 0.005, .t_end = 2.0});
    REQUIRE_MESSAGE(traj.ok, traj.error);
    CHECK(traj.events > 0);
    CHECK(traj.sup_tv <= 3.0 * size);
    for (double t : {0.5, 1.0, 1.9}) check_fronts_admissible(*sys, traj, t);
    const double slack = 10 * 0.005 * 0.005;
    CHECK(monotone_fraction(traj.records, traj.c0, slack) >= 0.99);
    // Profiles are consistent: fronts connect the neighbouring states.
    const auto fr = traj.fronts_at(1.0);
    for (std::size_t i = 0; i + 1 < fr.size(); ++i) {
      CHECK(max_norm(fr[i].second->wave.right - fr[i + 1].second->wave.left) <= 1e-12);
    }
  }
}

TEST_CASE("run: residuals scale with delta") {
  const auto sys = make_p_system();
  std::mt19937_64 rng(5);
  const Datum v0 = random_steps(sys->reference, 0.01, 5, 0.25, rng);
  const Datum vb = Datum::constant(v0(0.0));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TestFunction> phis;
  for (int i = 0; i < 6; ++i) {
    phis.push_back({.tc = 0.4 + 0.3 * u(rng), .rt = 0.2, .xc = 0.4 + 0.6 * u(rng), .rx = 0.3});
  }
  std::vector<double> weak, entropy;
  for (const double delta : {1e-2, 5e-3}) {
    const Trajectory traj = run(*sys, v0, vb, {.delta = delta, .t_end = 1.0});
    REQUIRE(traj.ok);
    double w = 0.0, e = 0.0;
    for (const TestFunction& phi : phis) {
      w = std::max(w, max_norm(weak_residual(*sys, traj, phi)));
      e = std::max(e, -entropy_residual(*sys, traj, phi));
    }
    weak.push_back(w / delta);
    entropy.push_back(e / delta);
  }
  CHECK(weak[0] <= 1.0);
  CHECK(weak[1] <= 1.0);
  CHECK(entropy[0] <= 1.0);
  CHECK(entropy[1] <= 1.0);
}

TEST_CASE("run: characteristic Burgers boundary hits are recorded") {
  const auto sys = make_burgers(0.0, 0.0, 1.0);
  std::mt19937_64 rng(8);
  long hits = 0;
  for (int trial = 0; trial < 6; ++trial) {
    // Mostly negative speeds, so the fronts reach the boundary.
    const Datum v0 = random_steps(vec({-0.015}), 0.02, 4, 0.05, rng);
    const Datum vb = random_steps(vec({0.0}), 0.02, 2, 5.0, rng);
    const Trajectory traj = run(*sys, v0, vb, {.delta = 0.01, .t_end = 30.0, .enforce_guard = false});
    REQUIRE_MESSAGE(traj.ok, traj.error);
    for (const auto& r : traj.records) {
      if (r.type != InteractionType::BoundaryHit) continue;
      ++hits;
      CHECK(r.characteristic);
      CHECK(r.bound >= 0.0);
      CHECK(std::isfinite(r.delta_v / (r.bound + 10 * 0.01 * 0.01)));
    }
  }
  CHECK(hits > 0);
}

TEST_CASE("run: whole-line mode") {
  const auto sys = make_p_system();
  const State vl = sys->reference + vec({0.02, 0.0});
  const Trajectory traj = run(*sys, Datum::step(0.0, vl, sys->reference), Datum(),
                              {.delta = 0.01, .t_end = 1.0, .boundary = false});
  REQUIRE(traj.ok);
  CHECK(traj.traces.empty());
  const RiemannFan exact = solve_riemann(*sys, vl, sys->reference);
  const oracle::TabulatedFan fan(*sys, exact);
  CHECK(l1_distance(traj, 1.0, -2.0, 2.0, fan, fan.breaks()) <= 0.03);
}

TEST_CASE("residuals refuse a failed run") {
  const auto sys = make_burgers();
  const Trajectory traj = run(*sys, Datum::step(0.3, vec({0.0}), vec({0.5})), Datum::constant(vec({0.0})),
                              {.delta = 0.01, .t_end = 1.0});
  REQUIRE_FALSE(traj.ok);
  CHECK_THROWS_AS(weak_residual(*sys, traj, {}), Error);
}
