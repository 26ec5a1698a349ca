// bdry_fronts: command-line driver for the boundary front-tracking library.

#include "bfront/harness.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

using namespace bfront;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDiagnostic = 2;

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int jobs = 0;
};

// "1,0.5" -> JSON array.
Json parse_numbers(const std::string& text, const char* what) {
  Json out = Json::array();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double x = std::stod(item, &used);
      if (used != item.size() && item.find_first_not_of(" ", used) != std::string::npos) throw 0;
      out.push_back(x);
    } catch (...) {
      throw Usage(std::string(what) + ": cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw Usage(std::string(what) + ": empty");
  return out;
}

State to_state(const Json& j) {
  State v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

// --system name plus --param key=value (value parsed as JSON when possible).
Json system_spec(const std::string& name, const std::vector<std::string>& params) {
  Json spec = {{"system", name}};
  for (const std::string& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw Usage("--param expects key=value, got '" + p + "'");
    const std::string key = p.substr(0, eq);
    const std::string value = p.substr(eq + 1);
    try {
      spec[key] = Json::parse(value);
    } catch (const Json::parse_error&) {
      spec[key] = value;
    }
  }
  return spec;
}

SystemPtr system_from(const Json& spec) {
  try {
    return build_system(spec);
  } catch (const Json::exception& e) {
    throw Usage(std::string("system parameters: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw Usage(std::string("system parameters: ") + e.what());
  }
}

void check_dim(const SystemDef& sys, const State& v, const char* what) {
  if (v.size() != sys.dim) {
    throw Usage(std::string(what) + ": expected " + std::to_string(sys.dim) + " components");
  }
}

std::string fan_csv(const std::vector<Wave>& waves) {
  std::string out = "wave,family,kind,speed,speed_right,strength\n";
  for (std::size_t i = 0; i < waves.size(); ++i) {
    const Wave& w = waves[i];
    out += std::to_string(i + 1) + "," + std::to_string(w.family + 1) + "," + to_string(w.kind) + "," +
           fmt(w.speed) + "," + fmt(w.speed_right) + "," + fmt(w.strength) + "\n";
  }
  return out;
}

// Writes under the output directory, or to stdout when there is none.
void emit(const Globals& g, const std::string& name, const std::string& text) {
  if (g.out_dir.empty()) {
    std::cout << "# " << name << "\n" << text << "\n";
  } else {
    write_text(std::filesystem::path(g.out_dir) / name, text);
  }
}

int finish(const ExperimentReport& rep) {
  int code = kOk;
  for (const RunMetrics& r : rep.runs) {
    if (!r.ok) {
      std::cerr << r.solver << " [" << r.label << ", " << r.parameter << "]: " << r.error << "\n";
      code = kDiagnostic;
    }
  }
  return code;
}

Scenario load(const std::string& path) {
  if (path.empty()) throw Usage("--scenario is required");
  return load_scenario(path);
}

HarnessOptions harness_options(const Globals& g) { return {g.jobs, g.seed, g.out_dir}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Front tracking with viscosity-consistent boundary conditions"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed (overrides the scenario's)");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--jobs", g.jobs, "Worker threads (default: BDRY_FRONTS_JOBS, else all cores)")
      ->check(CLI::PositiveNumber);
  app.fallthrough();

  std::string system = "p-system";
  std::vector<std::string> params;
  auto add_system = [&](CLI::App* cmd) {
    cmd->add_option("--system", system, "linear | burgers | p-system | lagrangian-euler");
    cmd->add_option("--param", params, "System parameter key=value (repeatable)");
  };

  // riemann
  auto* riemann_cmd = app.add_subcommand("riemann", "Solve an interior Riemann problem");
  add_system(riemann_cmd);
  std::string left, right, grid = "-2:2:401";
  riemann_cmd->add_option("--left", left, "Left state, comma separated")->required();
  riemann_cmd->add_option("--right", right, "Right state, comma separated")->required();
  riemann_cmd->add_option("--sample-grid", grid, "xi_min:xi_max:count");

  // boundary-riemann
  auto* boundary_cmd = app.add_subcommand("boundary-riemann", "Solve a boundary Riemann problem");
  add_system(boundary_cmd);
  std::string interior, datum, relation = "simD";
  boundary_cmd->add_option("--interior", interior, "Interior state")->required();
  boundary_cmd->add_option("--boundary-datum", datum, "Boundary datum")->required();
  boundary_cmd->add_option("--relation", relation, "simD | star")->check(CLI::IsMember({"simD", "star"}));

  // front-track
  auto* ft_cmd = app.add_subcommand("front-track", "Run front tracking on a scenario");
  std::string scenario;
  std::vector<double> deltas, sample_times;
  std::optional<double> t_end;
  ft_cmd->add_option("--scenario", scenario, "Scenario JSON file")->required();
  ft_cmd->add_option("--delta", deltas, "Front-tracking parameter(s)")->delimiter(',');
  ft_cmd->add_option("--t-end", t_end, "Final time");
  ft_cmd->add_option("--sample-times", sample_times, "Profile sample times")->delimiter(',');

  // viscous
  auto* visc_cmd = app.add_subcommand("viscous", "Run the viscous reference solver");
  add_system(visc_cmd);
  std::vector<double> epsilons;
  std::optional<double> dx;
  std::string initial_state, boundary_state;
  visc_cmd->add_option("--scenario", scenario, "Scenario JSON file");
  visc_cmd->add_option("--epsilon", epsilons, "Viscosity parameter(s)")->delimiter(',');
  visc_cmd->add_option("--dx", dx, "Grid spacing");
  visc_cmd->add_option("--t-end", t_end, "Final time");
  visc_cmd->add_option("--sample-times", sample_times, "Profile sample times")->delimiter(',');
  visc_cmd->add_option("--initial", initial_state, "Constant initial state (without --scenario)");
  visc_cmd->add_option("--boundary-datum", boundary_state, "Constant boundary datum (without --scenario)");

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "Compare inviscid limits across viscosity matrices");
  cmp_cmd->add_option("--scenario", scenario, "Scenario JSON file")->required();

  // estimate-suite
  auto* suite_cmd = app.add_subcommand("estimate-suite", "Fit the boundary interaction estimate");
  std::string suite = "burgers";
  std::size_t runs = 100;
  std::vector<double> suite_deltas = {1e-2, 5e-3};
  suite_cmd->add_option("--suite", suite, "burgers | euler | p-system");
  suite_cmd->add_option("--runs", runs, "Randomized scenarios per delta");
  suite_cmd->add_option("--delta", suite_deltas, "Front-tracking parameters")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (riemann_cmd->parsed()) {
      const SystemPtr sys = system_from(system_spec(system, params));
      const State vl = to_state(parse_numbers(left, "--left"));
      const State vr = to_state(parse_numbers(right, "--right"));
      check_dim(*sys, vl, "--left");
      check_dim(*sys, vr, "--right");
      double lo = -2, hi = 2;
      int count = 401;
      if (std::sscanf(grid.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 2 || !(hi > lo)) {
        throw Usage("--sample-grid expects xi_min:xi_max:count");
      }
      const RiemannFan fan = solve_riemann(*sys, vl, vr);
      std::string profile = "xi" + state_header("v_", sys->dim) + "\n";
      for (int i = 0; i < count; ++i) {
        const double xi = lo + (hi - lo) * i / (count - 1);
        profile += fmt(xi) + state_cells(sample_fan(*sys, fan, xi)) + "\n";
      }
      emit(g, "riemann_profile.csv", profile);
      emit(g, "riemann_fan.csv", fan_csv(fan.waves));
      return kOk;
    }

    if (boundary_cmd->parsed()) {
      const SystemPtr sys = system_from(system_spec(system, params));
      const State vi = to_state(parse_numbers(interior, "--interior"));
      const State vb = to_state(parse_numbers(datum, "--boundary-datum"));
      check_dim(*sys, vi, "--interior");
      check_dim(*sys, vb, "--boundary-datum");
      std::string summary = "relation,branch,xi" + state_header("trace_", sys->dim) + "\n";
      if (relation == "star") {
        const RiemannFan fan = solve_riemann(*sys, vb, vi);
        const State trace = star_trace(*sys, vi, vb);
        summary += "star,-," + fmt(0.0) + state_cells(trace) + "\n";
        emit(g, "boundary_summary.csv", summary);
        emit(g, "boundary_fan.csv", fan_csv(fan.waves));
        return kOk;
      }
      const BoundaryFan fan = solve_boundary_riemann(*sys, vi, vb);
      summary += std::string("simD,") + to_string(fan.branch) + "," + fmt(fan.xi) + state_cells(fan.trace) + "\n";
      std::vector<Wave> waves;
      if (fan.boundary_wave) waves.push_back(*fan.boundary_wave);
      waves.insert(waves.end(), fan.waves.begin(), fan.waves.end());
      std::string layer = "y" + state_header("w_", sys->dim) + "\n";
      for (std::size_t i = 0; i < fan.layer.y.size(); ++i) {
        layer += fmt(fan.layer.y[i]) + state_cells(fan.layer.w[i]) + "\n";
      }
      emit(g, "boundary_summary.csv", summary);
      emit(g, "boundary_fan.csv", fan_csv(waves));
      emit(g, "boundary_layer.csv", layer);
      return kOk;
    }

    if (ft_cmd->parsed()) {
      Scenario sc = load(scenario);
      sc.solvers = {"front-track"};
      sc.viscosities.clear();
      if (!deltas.empty()) sc.deltas = deltas;
      if (t_end) sc.t_end = *t_end;
      if (!sample_times.empty()) sc.sample_times = sample_times;
      for (double& t : sc.sample_times) t = std::min(t, sc.t_end);
      if (sc.out_dir.empty() && g.out_dir.empty()) g.out_dir = ".";
      return finish(run_scenario(sc, harness_options(g)));
    }

    if (visc_cmd->parsed()) {
      Scenario sc;
      if (!scenario.empty()) {
        sc = load(scenario);
      } else {
        if (initial_state.empty() || boundary_state.empty()) {
          throw Usage("viscous needs --scenario, or --initial and --boundary-datum");
        }
        Json doc = system_spec(system, params);
        doc["initial"] = {{"constant", parse_numbers(initial_state, "--initial")}};
        doc["boundary"] = {{"constant", parse_numbers(boundary_state, "--boundary-datum")}};
        sc = parse_scenario(doc.dump(), "<command line>");
      }
      sc.solvers = {"viscous"};
      sc.viscosities.clear();
      if (!epsilons.empty()) sc.epsilons = epsilons;
      if (dx) sc.viscous.dx = *dx;
      if (t_end) sc.t_end = *t_end;
      if (!sample_times.empty()) sc.sample_times = sample_times;
      for (double& t : sc.sample_times) t = std::min(t, sc.t_end);
      if (sc.out_dir.empty() && g.out_dir.empty()) g.out_dir = ".";
      return finish(run_scenario(sc, harness_options(g)));
    }

    if (cmp_cmd->parsed()) {
      Scenario sc = load(scenario);
      if (sc.viscosities.size() < 2) throw Usage("compare needs at least two viscosities");
      if (sc.out_dir.empty() && g.out_dir.empty()) g.out_dir = ".";
      const ExperimentReport rep = run_scenario(sc, harness_options(g));
      std::cout << compare_csv(rep.compare);
      return finish(rep);
    }

    if (suite_cmd->parsed()) {
      const SuiteKind kind = parse_suite(suite);
      for (double d : suite_deltas) {
        if (!(d > 0.0)) throw Usage("--delta must be > 0");
      }
      const SuiteResult r = estimate_suite(kind, g.seed.value_or(1), runs, suite_deltas, resolve_jobs(g.jobs));
      Json summary = {{"suite", to_string(kind)},
                      {"seed", g.seed.value_or(1)},
                      {"runs", runs},
                      {"deltas", r.deltas},
                      {"fitted_c", r.fitted_c},
                      {"max_signed_ratio", r.max_signed},
                      {"hits", r.hits},
                      {"aborted", r.aborted},
                      {"abort_messages", r.abort_messages},
                      {"slack", "10 delta^2"}};
      const double st = r.stability();
      summary["stability"] = std::isfinite(st) ? Json(st) : Json();
      const std::string dir = g.out_dir.empty() ? "." : g.out_dir;
      write_text(std::filesystem::path(dir) / "scatter.csv", scatter_csv(r));
      write_text(std::filesystem::path(dir) / "suite.json", summary.dump(2) + "\n");
      std::cout << summary.dump(2) << "\n";
      return kOk;
    }
  } catch (const Usage& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << to_string(e.kind()) << ": " << e.what() << "\n";
    const bool usage = e.kind() == ErrorKind::InvalidScenario || e.kind() == ErrorKind::InvalidArgument;
    return usage ? kUsage : kDiagnostic;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
