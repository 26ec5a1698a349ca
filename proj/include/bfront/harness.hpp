#pragma once

#include "bfront/front_tracking.hpp"
#include "bfront/viscous.hpp"

#include "json.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace bfront {

using Json = nlohmann::json;

struct ViscosityChoice {
  std::string label;
  Json spec;  // {"D": [[...]]} or {"viscosity": "artificial" | "navier-stokes", "mu": ...}
};

struct Scenario {
  std::string name = "scenario";
  Json system;  // {"kind": ..., parameters}
  std::vector<ViscosityChoice> viscosities;
  Datum initial;
  Datum boundary;
  std::vector<std::string> solvers = {"front-track"};
  std::vector<double> deltas = {1e-2};
  std::vector<double> epsilons = {1e-2};
  double t_end = 1.0;
  std::vector<double> sample_times;
  std::uint64_t seed = 1;
  std::string out_dir;
  bool cauchy = false;
  double x_max = -1.0;  // output window; <= 0: derived from the data
  ViscousOptions viscous;
  FrontTrackingOptions front_tracking;
  Json source;  // the parsed document, echoed into the report
};

/// Throws Error(InvalidScenario) with line context on malformed input.
Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");
Scenario load_scenario(const std::filesystem::path& path);

/// Datum from {"breaks": [...], "values": [[...], ...]}, {"constant": [...]}
/// or {"profile": "ramp", "from": [...], "to": [...], "a": ..., "b": ...}.
Datum parse_datum(const Json& j, int dim, const std::string& what);

/// System from its JSON spec; `viscosity` overrides the viscosity part.
SystemPtr build_system(const Json& spec, const Json* viscosity = nullptr);

std::uint64_t fnv1a(const std::string& bytes);
std::string hex_hash(std::uint64_t h);

/// Worker count: explicit value if > 0, else BDRY_FRONTS_JOBS, else the
/// hardware concurrency.
int resolve_jobs(int requested);

/// Runs fn(0..n-1) on a bounded pool; results are stored by index.
template <typename R>
std::vector<R> parallel_map(int jobs, std::size_t n, const std::function<R(std::size_t)>& fn) {
  std::vector<R> out(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) out[i] = fn(i);
  };
  const int count = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int w = 1; w < count; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

// CSV -----------------------------------------------------------------------

std::string fmt(double x);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string state_header(const char* prefix, int dim);
std::string state_cells(const State& v);

std::string ft_profile_csv(const Trajectory& traj, const std::vector<double>& times, double x_min,
                           double x_max);
std::string interactions_csv(const Trajectory& traj);
std::string functional_csv(const Trajectory& traj);
std::string viscous_profile_csv(const ViscousResult& r, int max_rows_per_time = 2000);
std::string viscous_traces_csv(const ViscousResult& r);

// Experiments -----------------------------------------------------------------

struct RunMetrics {
  std::string config_hash;
  std::string solver;  // "front-track" | "viscous"
  std::string label;   // viscosity label
  double parameter = 0.0;  // delta or epsilon
  bool ok = true;
  std::string error;
  Json metrics;
};

struct CompareRow {
  std::string label;
  State ft_trace;
  std::vector<double> epsilons;
  std::vector<State> viscous_traces;
  State extrapolated;
  double discrepancy = 0.0;  // |ft_trace - first row's ft_trace|
  State star_trace;
  double star_gap = 0.0;     // |ft_trace - star_trace|
  bool star_equivalent = false;
};

struct ExperimentReport {
  std::string name;
  std::string config_hash;
  std::vector<RunMetrics> runs;
  std::vector<CompareRow> compare;
  Json checks;  // pass/fail flags, functions of the metrics above
  Json to_json() const;
};

struct HarnessOptions {
  int jobs = 0;
  std::optional<std::uint64_t> seed;
  std::string out_dir;  // overrides the scenario's
};

/// Executes the scenario's solvers (and the limit comparison when it lists
/// two or more viscosities), writes CSVs and report.json.
ExperimentReport run_scenario(const Scenario& sc, const HarnessOptions& opts = {});
ExperimentReport run_scenario(const std::filesystem::path& path, const HarnessOptions& opts = {});

std::vector<CompareRow> compare_limits(const Scenario& sc, int jobs = 1);
std::string compare_csv(const std::vector<CompareRow>& rows);

// Randomized suites ---------------------------------------------------------

enum class SuiteKind { ShiftedBurgers, LagrangianEuler, PSystem };

SuiteKind parse_suite(const std::string& name);
const char* to_string(SuiteKind kind);

struct RandomCase {
  SystemPtr sys;
  Datum initial;
  Datum boundary;
  double t_end = 1.0;
  double size = 0.0;  // initial data size
};

/// Deterministic small-data half-line scenario number `index` of the suite.
RandomCase random_case(SuiteKind kind, std::uint64_t seed, std::size_t index,
                       double data_size = 0.05);

struct ScatterPoint {
  double delta = 0.0;
  std::size_t run = 0;
  double t = 0.0;
  int family = -1;
  bool characteristic = false;
  double s = 0.0;
  double varsigma_minus = 0.0;
  double xi = 0.0;
  double delta_v = 0.0;
  double ratio = 0.0;         // |delta_v| / (bound + 10 delta^2)
  double signed_ratio = 0.0;  // delta_v / (bound + 10 delta^2)
};

struct SuiteResult {
  SuiteKind kind = SuiteKind::ShiftedBurgers;
  std::vector<double> deltas;
  std::vector<double> fitted_c;   // per delta, from |delta_v|
  std::vector<double> max_signed; // per delta; <= 0 when no hit increases V
  std::vector<long> hits;         // per delta
  std::vector<long> aborted;      // per delta
  std::vector<std::string> abort_messages;
  std::vector<ScatterPoint> scatter;
  double stability() const;  // max / min of fitted_c
};

/// Runs n_runs random scenarios per delta and fits C = max |delta_v| ratio
/// over the boundary hits (characteristic family only for the GNL suite).
SuiteResult estimate_suite(SuiteKind kind, std::uint64_t seed, std::size_t n_runs,
                           const std::vector<double>& deltas, int jobs = 1);
std::string scatter_csv(const SuiteResult& r);

}  // namespace bfront
