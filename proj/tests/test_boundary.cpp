#include "doctest.h"

#include "bfront/boundary.hpp"
#include "bfront/linalg.hpp"

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

const Matrix kA = mat2(-1, 0, 0, 1);
const Matrix kDskew = mat2(1, 0, 1, 1);

// System with f = (u1^2/2, u1 + 2 u2), D = diag(0, 1): the hyperbolic speed u1
// crosses zero at the reference state.
SystemPtr crossing_block_system() {
  SystemDef s;
  s.name = "crossing-block";
  s.dim = 2;
  s.flux = [](const State& v) { return vec({0.5 * v[0] * v[0], v[0] + 2.0 * v[1]}); };
  s.flux_jacobian = [](const State& v) { return mat2(v[0], 0, 1, 2); };
  s.viscosity = [](const State&) { return mat2(0, 0, 0, 1); };
  s.hyperbolic_count = 1;
  s.kinds = {FieldKind::GenuinelyNonlinear, FieldKind::LinearlyDegenerate};
  s.reference = vec({0, 0});
  s.radius = 0.5;
  return finalize(s);
}

// Fourth-order Runge-Kutta reference for scalar layers w' = (f(w) - f(l)) / d.
double scalar_layer_oracle(double w0, double y, const std::function<double(double)>& rhs) {
  const int steps = 20000;
  const double h = y / steps;
  double w = w0;
  for (int i = 0; i < steps; ++i) {
    const double k1 = rhs(w), k2 = rhs(w + 0.5 * h * k1), k3 = rhs(w + 0.5 * h * k2),
                 k4 = rhs(w + h * k3);
    w += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return w;
}

void check_boundary_fan(const SystemDef& sys, const BoundaryFan& fan, const State& interior,
                        const State& vb) {
  State w = fan.trace;
  for (std::size_t i = 0; i < fan.waves.size(); ++i) {
    const Wave& wave = fan.waves[i];
    CHECK(wave.speed >= -1e-9);
    if (fan.branch != BoundaryBranch::Center || wave.family != fan.boundary_family) {
      CHECK(wave.speed > 0);
    }
    if (i > 0) CHECK(wave.family > fan.waves[i - 1].family);
    CHECK((wave.left - w).norm() <= 1e-12);
    w = wave.right;
  }
  CHECK((w - interior).norm() <= 1e-9);
  if (fan.boundary_wave) {
    const Wave& bw = *fan.boundary_wave;
    CHECK((sys.f(bw.left) - sys.f(bw.right)).norm() <= 1e-9);
    if (bw.kind == WaveKind::Shock) {
      CHECK(eigen_structure(sys, bw.left).values[bw.family] >= 0);
      CHECK(eigen_structure(sys, bw.right).values[bw.family] <= 0);
    }
  }
  CHECK(fan.layer.beta_residual <= 1e-9);
  CHECK(fan.layer.endpoint_residual <= 1e-6);
  CHECK(fan.layer.layer_residual <= 1e-7);
  CHECK((fan.layer.limit - fan.sub_trace).norm() <= 1e-14);
  const EquivWitness wit = check_equiv_D(sys, fan.trace, vb);
  CHECK(wit.holds);
}

}  // namespace

TEST_CASE("beta_tilde") {
  auto burgers = make_burgers();
  CHECK(beta_tilde(*burgers, vec({0.3}), vec({0.3})).norm() == 0.0);

  SUBCASE("p-system with Navier-Stokes viscosity: only the velocity is prescribed") {
    auto sys = make_p_system(2.0, Viscosity::NavierStokes);
    const auto r = beta_tilde(*sys, vec({1.05, 0.02}), vec({0.97, -0.01}));
    REQUIRE(r.size() == 1);
    CHECK(r[0] == doctest::Approx(0.03));
  }
  SUBCASE("incoming hyperbolic characteristic adds a condition") {
    Matrix A(3, 3);
    A << 0.5, 0.2, 0, 0.2, -1, 0.3, 0, 0.3, 1.5;
    Matrix D = Matrix::Identity(3, 3);
    D(0, 0) = 0;
    auto sys = make_linear(A, D, State::Zero(3));
    REQUIRE(sys->hyperbolic_count == 1);
    const auto r = beta_tilde(*sys, vec({0.1, 0.2, 0.3}), vec({0.0, 0.0, 0.0}));
    REQUIRE(r.size() == 3);
    CHECK(r[0] == doctest::Approx(0.2));
    CHECK(r[1] == doctest::Approx(0.3));
    CHECK(r[2] == doctest::Approx(0.1));
  }
  SUBCASE("hyperbolic speed crossing zero is rejected") {
    auto sys = crossing_block_system();
    try {
      beta_tilde(*sys, vec({0.1, 0.1}), vec({0.0, 0.0}));
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::CharacteristicHyperbolicBlock);
    }
  }
}

TEST_CASE("linear_boundary_trace: Gisclon example depends on D") {
  const State v0 = vec({0, 0}), vb = vec({1, 1});
  const LinearTrace id = linear_boundary_trace({kA, Matrix::Identity(2, 2), v0, vb});
  CHECK((id.trace - vec({0, 1})).norm() <= 1e-12);
  REQUIRE(id.fan.waves.size() == 1);
  CHECK(id.fan.waves[0].speed == doctest::Approx(1.0));
  CHECK(id.fan.waves[0].left[1] == doctest::Approx(1.0));
  CHECK(id.fan.waves[0].right[1] == doctest::Approx(0.0));

  const LinearTrace sk = linear_boundary_trace({kA, kDskew, v0, vb});
  CHECK((sk.trace - vec({0, 1.5})).norm() <= 1e-12);
  CHECK((id.trace - sk.trace).cwiseAbs().maxCoeff() == doctest::Approx(0.5));

  const LinearTrace same = linear_boundary_trace({kA, kDskew, vec({0.3, 0.4}), vec({0.3, 0.4})});
  CHECK((same.trace - vec({0.3, 0.4})).norm() <= 1e-14);
  CHECK(same.fan.waves.empty());
}

TEST_CASE("linear_boundary_trace properties on random data") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix D(2, 2);
    D << 1 + std::abs(normal(rng)), 0.5 * normal(rng), 0.5 * normal(rng), 1 + std::abs(normal(rng));
    if ((0.5 * (D + D.transpose())).eigenvalues().real().minCoeff() <= 0.1) continue;
    const State v0 = vec({normal(rng), normal(rng)}), vb = vec({normal(rng), normal(rng)});
    const LinearTrace t = linear_boundary_trace({kA, D, v0, vb});
    const Matrix S = stable_subspace(D.lu().solve(kA));
    const State d = vb - t.trace;
    CHECK((d - S * (S.transpose() * d)).norm() <= 1e-10);
    for (const Wave& w : t.fan.waves) {
      // Each jump solves v_t + A v_x = 0 exactly.
      CHECK((kA * (w.right - w.left) - w.speed * (w.right - w.left)).norm() <= 1e-12);
      CHECK(w.speed > 0);
    }
    CHECK((t.fan.states.back() - v0).norm() <= 1e-12);
  }
}

TEST_CASE("linear_boundary_trace rejects degenerate systems") {
  try {
    linear_boundary_trace({mat2(-1, 0, 0, 0), Matrix::Identity(2, 2), vec({0, 0}), vec({1, 1})});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK((e.kind() == ErrorKind::DegenerateTraceSystem || e.kind() == ErrorKind::MarginalSpectrum));
  }
}

TEST_CASE("solve_boundary_layer: Burgers closed form and non-existence") {
  auto burgers = make_burgers();
  const auto prof = solve_boundary_layer(*burgers, vec({-1.0}), vec({0.0}));
  REQUIRE(prof.has_value());
  double err = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < prof->y.size(); ++i) {
    if (prof->y[i] > 20.0) break;
    err = std::max(err, std::abs(prof->w[i][0] + std::tanh(prof->y[i] / 2.0)));
    ++count;
  }
  CAPTURE(err);
  CHECK(count > 100);
  CHECK(err <= 1e-6);
  CHECK(prof->endpoint_residual <= 1e-6);
  CHECK(prof->layer_residual <= 1e-7);
  CHECK(prof->xi == 0.0);

  CHECK_FALSE(solve_boundary_layer(*burgers, vec({1.0}), vec({0.0})).has_value());

  const auto flat = solve_boundary_layer(*burgers, vec({-0.4}), vec({-0.4}));
  REQUIRE(flat.has_value());
  for (const State& w : flat->w) CHECK(w[0] == -0.4);
}

TEST_CASE("solve_boundary_layer: center layer of the characteristic Burgers field") {
  auto burgers = make_burgers();
  const auto prof = solve_boundary_layer(*burgers, vec({0.0}), vec({-0.2}));
  REQUIRE(prof.has_value());
  CHECK(prof->xi == doctest::Approx(-0.2).epsilon(1e-9));
  // w' = w^2/2 from -0.2: w(y) = -2 / (y + 10).
  for (std::size_t i = 0; i < prof->y.size(); i += 17) {
    CHECK(prof->w[i][0] == doctest::Approx(-2.0 / (prof->y[i] + 10.0)).epsilon(1e-6));
  }
  CHECK(prof->endpoint_residual <= 1e-6);
  CHECK_FALSE(solve_boundary_layer(*burgers, vec({0.0}), vec({0.2})).has_value());
}

TEST_CASE("solve_boundary_layer: shooting consistency on systems") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const std::vector<SystemPtr> systems{make_p_system(2.0), make_lagrangian_euler(),
                                       make_linear(kA, kDskew, State::Zero(2))};
  for (const auto& sys : systems) {
    CAPTURE(sys->name);
    for (int trial = 0; trial < 8; ++trial) {
      State low = sys->reference;
      for (int i = 0; i < sys->dim; ++i) low[i] += 0.03 * unif(rng);
      const LayerShooter sh(*sys, low, default_layer_mode(*sys, low));
      Eigen::VectorXd c(sh.dim());
      for (int i = 0; i < sh.dim(); ++i) c[i] = 0.03 * unif(rng);
      const State vb = sh.shoot(c);
      const auto prof = solve_boundary_layer(*sys, low, vb);
      REQUIRE(prof.has_value());
      CHECK(prof->beta_residual <= 1e-9);
      CHECK(prof->layer_residual <= 1e-7);
      // Re-integrate the profile from w(0) with an independent fine RK4.
      State w = prof->w.front();
      const State fl = sys->f(low);
      const Matrix Dm = sys->D(low);
      double y = 0.0;
      const double y_end = prof->y[prof->y.size() / 2];
      const int steps = 40000;
      const double h = y_end / steps;
      const auto rhs = [&](const State& v) -> State {
        return sys->D(v).lu().solve(sys->f(v) - fl);
      };
      for (int s = 0; s < steps; ++s, y += h) {
        const State k1 = rhs(w), k2 = rhs(w + 0.5 * h * k1), k3 = rhs(w + 0.5 * h * k2),
                    k4 = rhs(w + h * k3);
        w += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      }
      CHECK((w - prof->w[prof->y.size() / 2]).norm() <= 1e-6);
      CHECK(prof->endpoint_residual <= 1e-6);
      (void)Dm;
    }
  }
}

TEST_CASE("solve_boundary_layer: singular hyperbolic flux block") {
  auto sys = make_p_system(2.0, Viscosity::NavierStokes);
  try {
    solve_boundary_layer(*sys, vec({1.0, 0.0}), vec({1.0, 0.01}));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DaeReductionFailed);
  }
}

TEST_CASE("check_equiv_D examples") {
  auto burgers = make_burgers();
  const EquivWitness same = check_equiv_D(*burgers, vec({-0.3}), vec({-0.3}));
  CHECK(same.holds);
  CHECK(same.sub_trace == vec({-0.3}));

  const EquivWitness tanh_layer = check_equiv_D(*burgers, vec({-1.0}), vec({0.0}));
  CHECK(tanh_layer.holds);
  CHECK(tanh_layer.sub_trace == vec({-1.0}));
  CHECK_FALSE(tanh_layer.boundary_wave.has_value());

  // 0-speed Lax shock at the boundary: sub-trace +1/2 on the left, trace -1/2.
  const EquivWitness shock = check_equiv_D(*burgers, vec({-0.5}), vec({0.5}));
  REQUIRE(shock.holds);
  CHECK(shock.sub_trace[0] == doctest::Approx(0.5).epsilon(1e-10));
  REQUIRE(shock.boundary_wave.has_value());
  CHECK(shock.boundary_wave->kind == WaveKind::Shock);
  // The mirrored pair violates the Lax orientation.
  CHECK_FALSE(check_equiv_D(*burgers, vec({0.5}), vec({-0.5 - 1e-3})).holds);

  // Non-characteristic: the witness sub-trace is the trace itself.
  auto lin = make_linear(kA, kDskew, State::Zero(2));
  const EquivWitness lw = check_equiv_D(*lin, vec({0.0, 1.5}), vec({1.0, 1.0}));
  CHECK(lw.holds);
  CHECK(lw.sub_trace == vec({0.0, 1.5}));
  CHECK_FALSE(check_equiv_D(*lin, vec({0.0, 1.0}), vec({1.0, 1.0})).holds);
}

TEST_CASE("~_* relation on the Gisclon example") {
  auto lin_id = make_linear(kA, Matrix::Identity(2, 2), State::Zero(2));
  auto lin_sk = make_linear(kA, kDskew, State::Zero(2));
  const State v0 = vec({0, 0}), vb = vec({1, 1});
  const State star = star_trace(*lin_id, v0, vb);
  CHECK((star - vec({0, 1})).norm() <= 1e-10);
  CHECK((star_trace(*lin_sk, v0, vb) - star).norm() <= 1e-12);
  CHECK(check_equiv_star(*lin_id, vec({0, 1}), vb));
  CHECK_FALSE(check_equiv_star(*lin_id, vec({0, 1.5}), vb));
}

TEST_CASE("solve_boundary_riemann: trivial and linear") {
  auto lin_id = make_linear(kA, Matrix::Identity(2, 2), State::Zero(2));
  auto lin_sk = make_linear(kA, kDskew, State::Zero(2));
  const BoundaryFan triv = solve_boundary_riemann(*lin_id, vec({0.2, 0.1}), vec({0.2, 0.1}));
  CHECK(triv.branch == BoundaryBranch::Trivial);
  CHECK(triv.waves.empty());

  const State v0 = vec({0, 0}), vb = vec({1, 1});
  for (const auto& [sys, D] : {std::pair{lin_id, Matrix(Matrix::Identity(2, 2))}, std::pair{lin_sk, kDskew}}) {
    const BoundaryFan fan = solve_boundary_riemann(*sys, v0, vb);
    const LinearTrace lt = linear_boundary_trace({kA, D, v0, vb});
    CHECK((fan.trace - lt.trace).norm() <= 1e-9);
    REQUIRE(fan.waves.size() == lt.fan.waves.size());
    for (std::size_t i = 0; i < fan.waves.size(); ++i) {
      CHECK(fan.waves[i].speed == doctest::Approx(lt.fan.waves[i].speed));
      CHECK((fan.waves[i].right - lt.fan.waves[i].right).norm() <= 1e-9);
    }
    check_boundary_fan(*sys, fan, v0, vb);
  }
}

TEST_CASE("solve_boundary_riemann: characteristic Burgers branches") {
  auto burgers = make_burgers();
  SUBCASE("center layer plus rarefaction") {
    const BoundaryFan fan = solve_boundary_riemann(*burgers, vec({0.1}), vec({-0.1}));
    CHECK(fan.branch == BoundaryBranch::Center);
    CHECK(std::abs(fan.trace[0]) <= 1e-9);
    CHECK(fan.xi == doctest::Approx(-0.1).epsilon(1e-8));
    REQUIRE(fan.waves.size() == 1);
    CHECK(fan.waves[0].kind == WaveKind::Rarefaction);
    check_boundary_fan(*burgers, fan, vec({0.1}), vec({-0.1}));
  }
  SUBCASE("stable: the interior state is the trace") {
    const BoundaryFan fan = solve_boundary_riemann(*burgers, vec({-0.15}), vec({0.05}));
    CHECK(fan.branch == BoundaryBranch::StableCharacteristic);
    CHECK(fan.trace[0] == doctest::Approx(-0.15));
    CHECK(fan.waves.empty());
    check_boundary_fan(*burgers, fan, vec({-0.15}), vec({0.05}));
  }
  SUBCASE("outgoing shock") {
    const BoundaryFan fan = solve_boundary_riemann(*burgers, vec({-0.05}), vec({0.15}));
    CHECK(fan.branch == BoundaryBranch::OutgoingCharacteristic);
    CHECK(fan.trace[0] == doctest::Approx(0.15));
    REQUIRE(fan.waves.size() == 1);
    CHECK(fan.waves[0].kind == WaveKind::Shock);
    CHECK(fan.waves[0].speed == doctest::Approx(0.05));
    check_boundary_fan(*burgers, fan, vec({-0.05}), vec({0.15}));
  }
}

TEST_CASE("solve_boundary_riemann: random small data on catalogue systems") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const std::vector<SystemPtr> systems{make_p_system(2.0), make_lagrangian_euler()};
  for (const auto& sys : systems) {
    CAPTURE(sys->name);
    for (int trial = 0; trial < 10; ++trial) {
      State interior = sys->reference, vb = sys->reference;
      for (int i = 0; i < sys->dim; ++i) {
        interior[i] += 0.02 * unif(rng);
        vb[i] += 0.02 * unif(rng);
      }
      const BoundaryFan fan = solve_boundary_riemann(*sys, interior, vb);
      if (sys->name == "lagrangian-euler") CHECK(fan.branch == BoundaryBranch::ZeroSpeedContact);
      check_boundary_fan(*sys, fan, interior, vb);
    }
  }
}
