#include "bfront/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace bfront {

namespace {

// Parsing -------------------------------------------------------------------

struct Context {
  const std::string* text;
  std::string origin;

  int line_of(std::size_t offset) const {
    const std::size_t end = std::min(offset, text->size());
    return 1 + static_cast<int>(std::count(text->begin(), text->begin() + end, '\n'));
  }
  // First occurrence of "key": in the document; line 1 if absent.
  int line_of_key(const std::string& key) const {
    const std::size_t at = text->find("\"" + key + "\"");
    return at == std::string::npos ? 1 : line_of(at);
  }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw Error(ErrorKind::InvalidScenario,
                origin + ":" + std::to_string(line_of_key(key)) + ": " + key + ": " + msg);
  }
};

const std::set<std::string> kSystemKeys = {"system", "gamma", "viscosity", "mu",        "kappa",
                                           "shift",  "A",     "D",         "reference", "radius"};
const std::set<std::string> kTopKeys = {
    "name",    "viscosities", "initial", "boundary", "solvers", "delta",    "epsilon",
    "t_end",   "sample_times", "seed",   "out_dir",  "cauchy",  "x_max",    "viscous",
    "front_tracking"};

State to_state(const Json& j) {
  if (j.is_number()) return State::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty()) throw std::invalid_argument("expected a number or an array of numbers");
  State v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw std::invalid_argument("expected numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix to_matrix(const Json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw std::invalid_argument("expected a matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const State row = to_state(j[static_cast<std::size_t>(r)]);
    if (row.size() != cols) throw std::invalid_argument("ragged matrix");
    m.row(r) = row.transpose();
  }
  return m;
}

std::vector<double> to_list(const Json& j) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) throw std::invalid_argument("expected a number or a list");
  std::vector<double> out;
  for (const Json& e : j) {
    if (!e.is_number()) throw std::invalid_argument("expected numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

Viscosity to_viscosity(const Json& j) {
  const std::string s = j.get<std::string>();
  if (s == "artificial") return Viscosity::Artificial;
  if (s == "navier-stokes") return Viscosity::NavierStokes;
  throw std::invalid_argument("unknown viscosity '" + s + "'");
}

double number_or(const Json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

std::string label_text(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

}  // namespace

SystemPtr build_system(const Json& spec, const Json* viscosity) {
  Json p = spec;
  if (viscosity != nullptr) {
    for (const auto& [k, v] : viscosity->items()) {
      if (k != "label") p[k] = v;
    }
  }
  const std::string kind = p.at("system").get<std::string>();
  const State reference = p.contains("reference") ? to_state(p.at("reference")) : State();
  const double radius = number_or(p, "radius", -1.0);
  if (kind == "linear") {
    if (!p.contains("A") || !p.contains("D")) throw std::invalid_argument("linear system needs A and D");
    return make_linear(to_matrix(p.at("A")), to_matrix(p.at("D")), reference, radius);
  }
  if (p.contains("D")) throw std::invalid_argument("a constant D is only accepted for linear systems");
  if (kind == "burgers") {
    return make_burgers(number_or(p, "shift", 0.0), reference.size() == 1 ? reference[0] : 0.0,
                        radius);
  }
  const Viscosity visc = p.contains("viscosity") ? to_viscosity(p.at("viscosity")) : Viscosity::Artificial;
  if (kind == "p-system") {
    return make_p_system(number_or(p, "gamma", 2.0), visc, number_or(p, "mu", 1.0), reference,
                         radius);
  }
  if (kind == "lagrangian-euler") {
    return make_lagrangian_euler(number_or(p, "gamma", 1.4), visc, number_or(p, "mu", 1.0),
                                 number_or(p, "kappa", 1.0), reference, radius);
  }
  throw std::invalid_argument("unknown system '" + kind + "'");
}

Datum parse_datum(const Json& j, int dim, const std::string& what) {
  auto check_dim = [&](const State& v) {
    if (v.size() != dim) {
      throw std::invalid_argument(what + ": state has " + std::to_string(v.size()) +
                                  " components, system has " + std::to_string(dim));
    }
    if (!v.allFinite()) throw std::invalid_argument(what + ": non-finite state");
    return v;
  };
  if (!j.is_object()) throw std::invalid_argument(what + ": expected an object");
  if (j.contains("constant")) return Datum::constant(check_dim(to_state(j.at("constant"))));
  if (j.contains("profile")) {
    const std::string name = j.at("profile").get<std::string>();
    if (name != "ramp") throw std::invalid_argument(what + ": unknown profile '" + name + "'");
    const State from = check_dim(to_state(j.at("from")));
    const State to = check_dim(to_state(j.at("to")));
    Datum d;
    d.a = number_or(j, "a", 0.0);
    d.b = number_or(j, "b", 1.0);
    if (!(d.b > d.a)) throw std::invalid_argument(what + ": ramp needs b > a");
    const double a = d.a, b = d.b;
    d.profile = [from, to, a, b](double s) -> State {
      const double th = std::clamp((s - a) / (b - a), 0.0, 1.0);
      return from + th * (to - from);
    };
    return d;
  }
  if (!j.contains("values")) throw std::invalid_argument(what + ": needs values, constant or profile");
  Datum d;
  d.breaks = j.contains("breaks") ? to_list(j.at("breaks")) : std::vector<double>{};
  for (const Json& v : j.at("values")) d.values.push_back(check_dim(to_state(v)));
  if (d.values.size() != d.breaks.size() + 1) {
    throw std::invalid_argument(what + ": values must have one more entry than breaks");
  }
  if (!std::is_sorted(d.breaks.begin(), d.breaks.end()) ||
      std::adjacent_find(d.breaks.begin(), d.breaks.end()) != d.breaks.end()) {
    throw std::invalid_argument(what + ": breaks must be strictly increasing");
  }
  for (double x : d.breaks) {
    if (!std::isfinite(x)) throw std::invalid_argument(what + ": non-finite break");
  }
  return d;
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  Context ctx{&text, origin};
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::InvalidScenario,
                origin + ":" + std::to_string(ctx.line_of(e.byte == 0 ? 0 : e.byte - 1)) +
                    ": malformed JSON: " + e.what());
  }
  if (!doc.is_object()) ctx.fail("system", "scenario must be a JSON object");
  for (const auto& [k, v] : doc.items()) {
    if (!kSystemKeys.count(k) && !kTopKeys.count(k)) ctx.fail(k, "unknown key");
  }
  if (!doc.contains("system")) ctx.fail("system", "missing system selector");

  Scenario sc;
  sc.source = doc;
  std::string key;
  try {
    key = "name";
    if (doc.contains(key)) sc.name = doc.at(key).get<std::string>();
    sc.system = Json::object();
    for (const auto& k : kSystemKeys) {
      if (doc.contains(k)) sc.system[k] = doc.at(k);
    }
    key = "system";
    const SystemPtr sys = build_system(sc.system);

    key = "viscosities";
    if (doc.contains(key)) {
      for (const Json& v : doc.at(key)) {
        ViscosityChoice c;
        c.label = v.at("label").get<std::string>();
        c.spec = v;
        build_system(sc.system, &c.spec);  // validates
        sc.viscosities.push_back(std::move(c));
      }
    }
    key = "cauchy";
    if (doc.contains(key)) sc.cauchy = doc.at(key).get<bool>();
    key = "initial";
    if (!doc.contains(key)) ctx.fail(key, "missing initial datum");
    sc.initial = parse_datum(doc.at(key), sys->dim, key);
    key = "boundary";
    if (doc.contains(key)) {
      sc.boundary = parse_datum(doc.at(key), sys->dim, key);
    } else if (sc.cauchy) {
      sc.boundary = Datum::constant(sc.initial(0.0));
    } else {
      ctx.fail(key, "missing boundary datum");
    }
    if (!std::isfinite(sc.initial.total_variation()) || !std::isfinite(sc.boundary.total_variation())) {
      ctx.fail("initial", "datum variation is not finite");
    }
    if (sc.cauchy && !sc.initial.piecewise_constant()) {
      ctx.fail("initial", "the whole-line comparison needs a piecewise constant datum");
    }
    key = "solvers";
    if (doc.contains(key)) {
      sc.solvers.clear();
      for (const Json& s : doc.at(key)) {
        const std::string name = s.get<std::string>();
        if (name != "front-track" && name != "viscous") ctx.fail(key, "unknown solver '" + name + "'");
        sc.solvers.push_back(name);
      }
    }
    key = "delta";
    if (doc.contains(key)) sc.deltas = to_list(doc.at(key));
    for (double d : sc.deltas) {
      if (!(d > 0.0)) ctx.fail(key, "must be > 0");
    }
    key = "epsilon";
    if (doc.contains(key)) sc.epsilons = to_list(doc.at(key));
    for (double e : sc.epsilons) {
      if (!(e > 0.0)) ctx.fail(key, "must be > 0");
    }
    if (sc.deltas.empty() || sc.epsilons.empty()) ctx.fail(key, "must not be empty");
    key = "t_end";
    if (doc.contains(key)) sc.t_end = doc.at(key).get<double>();
    if (!(sc.t_end > 0.0)) ctx.fail(key, "must be > 0");
    key = "sample_times";
    if (doc.contains(key)) sc.sample_times = to_list(doc.at(key));
    for (double t : sc.sample_times) {
      if (!(t >= 0.0 && t <= sc.t_end)) ctx.fail(key, "must lie in [0, t_end]");
    }
    if (sc.sample_times.empty()) sc.sample_times = {sc.t_end};
    key = "seed";
    if (doc.contains(key)) sc.seed = doc.at(key).get<std::uint64_t>();
    key = "out_dir";
    if (doc.contains(key)) sc.out_dir = doc.at(key).get<std::string>();
    key = "x_max";
    if (doc.contains(key)) sc.x_max = doc.at(key).get<double>();

    key = "viscous";
    if (doc.contains(key)) {
      const Json& v = doc.at(key);
      for (const auto& [k, _] : v.items()) {
        if (k != "length" && k != "dx" && k != "safety" && k != "trace_k") ctx.fail(k, "unknown key");
      }
      sc.viscous.length = number_or(v, "length", sc.viscous.length);
      sc.viscous.dx = number_or(v, "dx", sc.viscous.dx);
      sc.viscous.safety = number_or(v, "safety", sc.viscous.safety);
      sc.viscous.trace_k = number_or(v, "trace_k", sc.viscous.trace_k);
      if (!(sc.viscous.length > 0.0) || !(sc.viscous.safety > 0.0) || !(sc.viscous.trace_k > 0.0)) {
        ctx.fail(key, "length, safety and trace_k must be > 0");
      }
    }
    key = "front_tracking";
    if (doc.contains(key)) {
      const Json& f = doc.at(key);
      FrontTrackingOptions& o = sc.front_tracking;
      static const std::set<std::string> known = {"weight_boundary", "c0",           "rho",
                                                  "guard",           "enforce_guard", "tv_cap_factor",
                                                  "max_events",      "max_fronts"};
      for (const auto& [k, _] : f.items()) {
        if (!known.count(k)) ctx.fail(k, "unknown key");
      }
      o.weight_boundary = number_or(f, "weight_boundary", o.weight_boundary);
      o.c0 = number_or(f, "c0", o.c0);
      o.rho = number_or(f, "rho", o.rho);
      o.guard = number_or(f, "guard", o.guard);
      if (f.contains("enforce_guard")) o.enforce_guard = f.at("enforce_guard").get<bool>();
      o.tv_cap_factor = number_or(f, "tv_cap_factor", o.tv_cap_factor);
      if (f.contains("max_events")) o.max_events = f.at("max_events").get<long>();
      if (f.contains("max_fronts")) o.max_fronts = f.at("max_fronts").get<long>();
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidScenario) throw;
    ctx.fail(key, e.what());
  } catch (const Json::exception& e) {
    ctx.fail(key, e.what());
  } catch (const std::invalid_argument& e) {
    ctx.fail(key, e.what());
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidScenario, path.string() + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int resolve_jobs(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BDRY_FRONTS_JOBS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// CSV -----------------------------------------------------------------------

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10e", x);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
}

std::string state_header(const char* prefix, int dim) {
  std::string out;
  for (int i = 1; i <= dim; ++i) out += std::string(",") + prefix + std::to_string(i);
  return out;
}

std::string state_cells(const State& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += "," + fmt(v[i]);
  return out;
}

std::string ft_profile_csv(const Trajectory& traj, const std::vector<double>& times, double x_min,
                           double x_max) {
  const int dim = static_cast<int>(traj.far_right.size());
  std::string out = "t,x" + state_header("v_", dim) + "\n";
  for (double t : times) {
    const auto pieces = traj.profile(t, x_min, x_max);
    // Each piece contributes its two end points, so the staircase plots as is.
    for (const ProfilePiece& p : pieces) {
      out += fmt(t) + "," + fmt(p.x_left) + state_cells(p.state) + "\n";
      out += fmt(t) + "," + fmt(p.x_right) + state_cells(p.state) + "\n";
    }
  }
  return out;
}

std::string interactions_csv(const Trajectory& traj) {
  std::string out = "tau,x,type,family,characteristic,simplified,delta_v,bound,xi_k,varsigma_k\n";
  for (const InteractionRecord& r : traj.records) {
    out += fmt(r.t) + "," + fmt(r.x) + "," + to_string(r.type) + "," + std::to_string(r.family + 1) +
           "," + (r.characteristic ? "1" : "0") + "," + (r.simplified ? "1" : "0") + "," +
           fmt(r.delta_v) + "," + fmt(r.bound) + "," + fmt(r.xi_pre) + "," + fmt(r.varsigma) + "\n";
  }
  return out;
}

std::string functional_csv(const Trajectory& traj) {
  std::string out = "t,V,Q,Qb,Upsilon,strength,TV,fronts\n";
  for (const FunctionalPoint& p : traj.functional) {
    out += fmt(p.t) + "," + fmt(p.glimm.V) + "," + fmt(p.glimm.Q) + "," + fmt(p.glimm.Qb) + "," +
           fmt(p.glimm.upsilon(traj.c0)) + "," + fmt(p.glimm.strength) + "," +
           fmt(p.total_variation) + "," + std::to_string(p.fronts) + "\n";
  }
  return out;
}

namespace {

std::string ft_traces_csv(const Trajectory& traj) {
  const int dim = static_cast<int>(traj.far_right.size());
  std::string out = "t,branch,xi" + state_header("vb_", dim) + state_header("trace_", dim) + "\n";
  for (const TracePoint& p : traj.traces) {
    out += fmt(p.t) + "," + to_string(p.branch) + "," + fmt(p.xi) + state_cells(p.vb) +
           state_cells(p.trace) + "\n";
  }
  return out;
}

}  // namespace

std::string viscous_profile_csv(const ViscousResult& r, int max_rows_per_time) {
  const int dim = r.samples.empty() || r.samples[0].v.empty() ? 0 : static_cast<int>(r.samples[0].v[0].size());
  std::string out = "t,x" + state_header("v_", dim) + "\n";
  for (const ViscousSample& s : r.samples) {
    const std::size_t n = s.x.size();
    const std::size_t stride = std::max<std::size_t>(1, (n + max_rows_per_time - 1) / max_rows_per_time);
    for (std::size_t i = 0; i < n; i += stride) out += fmt(s.t) + "," + fmt(s.x[i]) + state_cells(s.v[i]) + "\n";
  }
  return out;
}

std::string viscous_traces_csv(const ViscousResult& r) {
  const int dim = r.samples.empty() ? 0 : static_cast<int>(r.samples[0].trace.size());
  std::string out = "t" + state_header("vbar_", dim) + "\n";
  for (const ViscousSample& s : r.samples) out += fmt(s.t) + state_cells(s.trace) + "\n";
  return out;
}

// Experiments -----------------------------------------------------------------

namespace {

struct Job {
  std::string solver;
  const ViscosityChoice* viscosity = nullptr;  // null: the system's own
  double parameter = 0.0;
};

struct JobOutput {
  RunMetrics metrics;
  std::vector<std::pair<std::string, std::string>> files;  // relative path, content
  std::optional<State> trace;
};

// Whole-line datum: the boundary value at t = 0 on x < 0, v0 on x > 0.
Datum whole_line(const Scenario& sc) {
  Datum d = sc.initial;
  const State left = sc.boundary(0.0);
  if (d.breaks.empty() || d.breaks.front() > 0.0) {
    d.breaks.insert(d.breaks.begin(), 0.0);
    d.values.insert(d.values.begin(), left);
  } else {
    d.values.front() = left;
  }
  return d;
}

double output_x_max(const Scenario& sc, const SystemDef& sys) {
  if (sc.x_max > 0.0) return sc.x_max;
  double far = sc.initial.piecewise_constant()
                   ? (sc.initial.breaks.empty() ? 0.0 : sc.initial.breaks.back())
                   : sc.initial.b;
  return std::max(far, 0.0) + sys.max_speed * sc.t_end + 0.5;
}

// Mean of the sampled nodes in [lo, hi].
State node_average(const ViscousSample& s, double lo, double hi) {
  State sum;
  int count = 0;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    if (s.x[i] < lo || s.x[i] > hi) continue;
    sum = count == 0 ? s.v[i] : State(sum + s.v[i]);
    ++count;
  }
  return count == 0 ? State() : State(sum / count);
}

Json state_json(const State& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

std::string job_dir(const Job& job) {
  const std::string label = job.viscosity ? job.viscosity->label : "default";
  const std::string param = job.solver == "front-track" ? "delta" : "eps";
  return job.solver + "_" + label + "_" + param + "=" + label_text(job.parameter);
}

std::string job_hash(const Scenario& sc, const Job& job) {
  Json cfg = sc.source;
  cfg.erase("out_dir");
  cfg["run"] = {{"solver", job.solver},
                {"parameter", job.parameter},
                {"viscosity", job.viscosity ? job.viscosity->spec : Json()},
                {"seed", sc.seed}};
  return hex_hash(fnv1a(cfg.dump()));
}

JobOutput run_front_tracking(const Scenario& sc, const Job& job) {
  JobOutput out;
  const SystemPtr sys = build_system(sc.system, job.viscosity ? &job.viscosity->spec : nullptr);
  FrontTrackingOptions opts = sc.front_tracking;
  opts.delta = job.parameter;
  opts.t_end = sc.t_end;
  opts.boundary = !sc.cauchy;
  const Datum v0 = sc.cauchy ? whole_line(sc) : sc.initial;
  const Trajectory traj = run(*sys, v0, sc.cauchy ? Datum() : sc.boundary, opts);

  RunMetrics& m = out.metrics;
  m.ok = traj.ok;
  m.error = traj.ok ? "" : std::string(to_string(traj.error_kind)) + ": " + traj.error;
  const double slack = 10.0 * opts.delta * opts.delta;
  long hits = 0;
  double max_ratio = 0.0;
  for (const InteractionRecord& r : traj.records) {
    if (r.type != InteractionType::BoundaryHit) continue;
    ++hits;
    max_ratio = std::max(max_ratio, std::abs(r.delta_v) / (r.bound + slack));
  }
  double final_tv = 0.0, final_upsilon = 0.0;
  if (!traj.functional.empty()) {
    final_tv = traj.functional.back().total_variation;
    final_upsilon = traj.functional.back().glimm.upsilon(traj.c0);
  }
  m.metrics = {{"events", traj.events},
               {"interactions", traj.records.size()},
               {"boundary_hits", hits},
               {"initial_size", traj.initial_size},
               {"sup_tv", traj.sup_tv},
               {"final_tv", final_tv},
               {"final_upsilon", final_upsilon},
               {"c0", traj.c0},
               {"monotone_fraction", monotone_fraction(traj.records, traj.c0, slack)},
               {"max_interaction_ratio", max_ratio},
               {"max_fronts", traj.max_fronts_seen}};

  const double x_max = output_x_max(sc, *sys);
  const double x_min = sc.cauchy ? -x_max : 0.0;
  if (traj.ok) {
    if (sc.cauchy) {
      out.trace = traj.sample(sc.t_end, 1e-9);
    } else if (!traj.traces.empty()) {
      out.trace = traj.trace_at(sc.t_end).trace;
    }
    if (out.trace) m.metrics["trace"] = state_json(*out.trace);
  }
  const std::string dir = job_dir(job);
  if (traj.ok || !traj.segments.empty()) {
    std::vector<double> times;
    for (double t : sc.sample_times) {
      if (traj.ok) times.push_back(t);
    }
    out.files.emplace_back(dir + "/profile.csv", ft_profile_csv(traj, times, x_min, x_max));
  }
  out.files.emplace_back(dir + "/interactions.csv", interactions_csv(traj));
  out.files.emplace_back(dir + "/functional.csv", functional_csv(traj));
  if (!sc.cauchy) out.files.emplace_back(dir + "/traces.csv", ft_traces_csv(traj));
  return out;
}

JobOutput run_viscous(const Scenario& sc, const Job& job) {
  JobOutput out;
  const SystemPtr sys = build_system(sc.system, job.viscosity ? &job.viscosity->spec : nullptr);
  ViscousOptions opts = sc.viscous;
  opts.boundary = !sc.cauchy;
  const double eps = job.parameter;
  RunMetrics& m = out.metrics;
  try {
    const Datum v0 = sc.cauchy ? whole_line(sc) : sc.initial;
    ViscousResult r = viscous_solve(*sys, v0, sc.boundary, eps, sc.t_end, sc.sample_times, opts);
    if (sc.cauchy) {
      for (ViscousSample& s : r.samples) {
        s.trace = node_average(s, opts.trace_k * eps, 2.0 * opts.trace_k * eps);
      }
    }
    m.metrics = {{"steps", r.steps}, {"dt", r.dt}, {"dx", r.dx}};
    if (!r.samples.empty() && r.samples.back().trace.size() > 0) {
      out.trace = r.samples.back().trace;
      m.metrics["trace"] = state_json(*out.trace);
    }
    const std::string dir = job_dir(job);
    out.files.emplace_back(dir + "/profile.csv", viscous_profile_csv(r));
    out.files.emplace_back(dir + "/traces.csv", viscous_traces_csv(r));
  } catch (const Error& e) {
    m.ok = false;
    m.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return out;
}

std::vector<JobOutput> execute(const Scenario& sc, const std::vector<Job>& jobs, int workers) {
  std::function<JobOutput(std::size_t)> fn = [&](std::size_t i) {
    const Job& job = jobs[i];
    JobOutput out;
    try {
      out = job.solver == "front-track" ? run_front_tracking(sc, job) : run_viscous(sc, job);
    } catch (const Error& e) {
      out.metrics.ok = false;
      out.metrics.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
    out.metrics.solver = job.solver;
    out.metrics.label = job.viscosity ? job.viscosity->label : "default";
    out.metrics.parameter = job.parameter;
    out.metrics.config_hash = job_hash(sc, job);
    return out;
  };
  return parallel_map<JobOutput>(workers, jobs.size(), fn);
}

std::vector<Job> plan(const Scenario& sc, const std::vector<std::string>& solvers,
                      const std::vector<double>& deltas) {
  std::vector<const ViscosityChoice*> viscosities;
  for (const ViscosityChoice& v : sc.viscosities) viscosities.push_back(&v);
  if (viscosities.empty()) viscosities.push_back(nullptr);
  std::vector<Job> jobs;
  for (const ViscosityChoice* v : viscosities) {
    for (const std::string& solver : solvers) {
      const auto& params = solver == "front-track" ? deltas : sc.epsilons;
      for (double p : params) jobs.push_back({solver, v, p});
    }
  }
  return jobs;
}

std::vector<CompareRow> build_compare(const Scenario& sc, const std::vector<Job>& jobs,
                                      const std::vector<JobOutput>& outputs, double delta) {
  std::vector<CompareRow> rows;
  std::vector<const ViscosityChoice*> order;
  for (const ViscosityChoice& v : sc.viscosities) order.push_back(&v);
  if (order.empty()) order.push_back(nullptr);
  for (const ViscosityChoice* v : order) {
    CompareRow row;
    row.label = v ? v->label : "default";
    const SystemPtr sys = build_system(sc.system, v ? &v->spec : nullptr);
    std::vector<std::pair<double, State>> visc;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].viscosity != v || !outputs[i].trace) continue;
      if (jobs[i].solver == "front-track" && jobs[i].parameter == delta) row.ft_trace = *outputs[i].trace;
      if (jobs[i].solver == "viscous") visc.emplace_back(jobs[i].parameter, *outputs[i].trace);
    }
    std::sort(visc.begin(), visc.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [e, tr] : visc) {
      row.epsilons.push_back(e);
      row.viscous_traces.push_back(tr);
    }
    if (visc.size() >= 2) {
      // Linear extrapolation to eps = 0 from the two smallest eps.
      const auto& [e1, t1] = visc[0];
      const auto& [e2, t2] = visc[1];
      row.extrapolated = t1 - e1 * (t2 - t1) / (e2 - e1);
    } else if (visc.size() == 1) {
      row.extrapolated = visc[0].second;
    }
    if (row.ft_trace.size() > 0 && !sc.cauchy) {
      const State vb = sc.boundary(sc.t_end);
      const State interior = sc.initial(0.0);
      try {
        row.star_trace = star_trace(*sys, interior, vb);
        row.star_gap = max_norm(row.ft_trace - row.star_trace);
        row.star_equivalent = check_equiv_star(*sys, row.ft_trace, vb);
      } catch (const Error&) {
        row.star_trace = State();
      }
    }
    rows.push_back(std::move(row));
  }
  for (CompareRow& row : rows) {
    if (row.ft_trace.size() > 0 && rows[0].ft_trace.size() == row.ft_trace.size()) {
      row.discrepancy = max_norm(row.ft_trace - rows[0].ft_trace);
    } else {
      row.discrepancy = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return rows;
}

void write_outputs(const std::filesystem::path& root, const std::vector<JobOutput>& outputs) {
  for (const JobOutput& o : outputs) {
    for (const auto& [rel, text] : o.files) write_text(root / rel, text);
  }
}

}  // namespace

std::vector<CompareRow> compare_limits(const Scenario& sc, int jobs) {
  const double delta = *std::min_element(sc.deltas.begin(), sc.deltas.end());
  const std::vector<Job> js = plan(sc, {"front-track", "viscous"}, {delta});
  const auto outputs = execute(sc, js, resolve_jobs(jobs));
  for (const JobOutput& o : outputs) {
    if (!o.metrics.ok) {
      throw Error(ErrorKind::InvalidArgument,
                  o.metrics.solver + " run (" + o.metrics.label + ") failed: " + o.metrics.error);
    }
  }
  return build_compare(sc, js, outputs, delta);
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  int dim = 0;
  std::size_t n_eps = 0;
  for (const CompareRow& r : rows) {
    dim = std::max(dim, static_cast<int>(r.ft_trace.size()));
    n_eps = std::max(n_eps, r.epsilons.size());
  }
  std::string out = "label" + state_header("ft_trace_", dim);
  for (std::size_t e = 0; e < n_eps; ++e) {
    out += ",eps_" + std::to_string(e + 1) + state_header(("viscous_" + std::to_string(e + 1) + "_").c_str(), dim);
  }
  out += state_header("extrapolated_", dim) + ",discrepancy" + state_header("star_trace_", dim) +
         ",star_gap,star_equivalent\n";
  auto cells = [dim](const State& v) {
    return v.size() == dim ? state_cells(v) : std::string(static_cast<std::size_t>(dim), ',');
  };
  for (const CompareRow& r : rows) {
    out += r.label + cells(r.ft_trace);
    for (std::size_t e = 0; e < n_eps; ++e) {
      if (e < r.epsilons.size()) {
        out += "," + fmt(r.epsilons[e]) + cells(r.viscous_traces[e]);
      } else {
        out += "," + cells(State());
      }
    }
    out += cells(r.extrapolated) + "," + fmt(r.discrepancy) + cells(r.star_trace) + "," +
           fmt(r.star_gap) + "," + (r.star_equivalent ? "1" : "0") + "\n";
  }
  return out;
}

Json ExperimentReport::to_json() const {
  Json j;
  j["name"] = name;
  j["config_hash"] = config_hash;
  j["runs"] = Json::array();
  for (const RunMetrics& r : runs) {
    j["runs"].push_back({{"config_hash", r.config_hash},
                         {"solver", r.solver},
                         {"label", r.label},
                         {"parameter", r.parameter},
                         {"ok", r.ok},
                         {"error", r.error},
                         {"metrics", r.metrics}});
  }
  j["compare"] = Json::array();
  for (const CompareRow& c : compare) {
    Json visc = Json::array();
    for (std::size_t e = 0; e < c.epsilons.size(); ++e) {
      visc.push_back({{"epsilon", c.epsilons[e]}, {"trace", state_json(c.viscous_traces[e])}});
    }
    j["compare"].push_back({{"label", c.label},
                            {"ft_trace", state_json(c.ft_trace)},
                            {"viscous", visc},
                            {"extrapolated", state_json(c.extrapolated)},
                            {"discrepancy", c.discrepancy},
                            {"star_trace", state_json(c.star_trace)},
                            {"star_gap", c.star_gap},
                            {"star_equivalent", c.star_equivalent}});
  }
  j["checks"] = checks;
  return j;
}

namespace {

// Pass/fail flags derived from the metrics only.
Json derive_checks(const ExperimentReport& rep) {
  Json checks = Json::object();
  bool all_ok = true;
  for (const RunMetrics& r : rep.runs) all_ok = all_ok && r.ok;
  checks["all_runs_ok"] = all_ok;
  bool tv_bounded = true;
  for (const RunMetrics& r : rep.runs) {
    if (r.solver != "front-track" || !r.ok) continue;
    const double size = r.metrics.at("initial_size").get<double>();
    tv_bounded = tv_bounded && r.metrics.at("sup_tv").get<double>() <= 3.0 * size + 1e-12;
  }
  checks["tv_bounded"] = tv_bounded;
  if (!rep.compare.empty()) {
    bool viscous_match = true;
    for (const CompareRow& c : rep.compare) {
      if (c.viscous_traces.empty() || c.ft_trace.size() == 0) continue;
      viscous_match = viscous_match && max_norm(c.viscous_traces.front() - c.ft_trace) <= 5e-2;
    }
    checks["viscous_matches_front_tracking"] = viscous_match;
  }
  return checks;
}

}  // namespace

ExperimentReport run_scenario(const Scenario& input, const HarnessOptions& opts) {
  Scenario sc = input;
  if (opts.seed) {
    sc.seed = *opts.seed;
    sc.source["seed"] = sc.seed;
  }
  if (!opts.out_dir.empty()) sc.out_dir = opts.out_dir;
  const int workers = resolve_jobs(opts.jobs);

  std::vector<std::string> solvers = sc.solvers;
  const bool comparing = sc.viscosities.size() >= 2;
  if (comparing) solvers = {"front-track", "viscous"};
  const std::vector<Job> jobs = plan(sc, solvers, sc.deltas);
  const std::vector<JobOutput> outputs = execute(sc, jobs, workers);

  ExperimentReport rep;
  rep.name = sc.name;
  {
    Json cfg = sc.source;
    cfg.erase("out_dir");
    rep.config_hash = hex_hash(fnv1a(cfg.dump()));
  }
  for (const JobOutput& o : outputs) rep.runs.push_back(o.metrics);
  std::stable_sort(rep.runs.begin(), rep.runs.end(),
                   [](const RunMetrics& a, const RunMetrics& b) { return a.config_hash < b.config_hash; });
  if (comparing) {
    rep.compare = build_compare(sc, jobs, outputs, *std::min_element(sc.deltas.begin(), sc.deltas.end()));
  }
  rep.checks = derive_checks(rep);

  if (!sc.out_dir.empty()) {
    const std::filesystem::path root(sc.out_dir);
    write_outputs(root, outputs);
    if (comparing) write_text(root / "compare.csv", compare_csv(rep.compare));
    Json report = rep.to_json();
    report["scenario"] = sc.source;
    report["defaults"] = {
        {"viscous", {{"length", sc.viscous.length},
                     {"dx", sc.viscous.dx > 0 ? sc.viscous.dx : 2e-4 * sc.viscous.length},
                     {"safety", sc.viscous.safety},
                     {"trace_k", sc.viscous.trace_k}}},
        {"front_tracking",
         {{"weight_boundary", sc.front_tracking.weight_boundary},
          {"c0", sc.front_tracking.c0},
          {"rho", sc.front_tracking.rho},
          {"guard", sc.front_tracking.guard},
          {"enforce_guard", sc.front_tracking.enforce_guard},
          {"tv_cap_factor", sc.front_tracking.tv_cap_factor},
          {"max_events", sc.front_tracking.max_events},
          {"max_fronts", sc.front_tracking.max_fronts},
          {"monotonicity_slack", "10 delta^2"}}}};
    write_text(root / "report.json", report.dump(2) + "\n");
  }
  return rep;
}

ExperimentReport run_scenario(const std::filesystem::path& path, const HarnessOptions& opts) {
  return run_scenario(load_scenario(path), opts);
}

// Randomized suites ---------------------------------------------------------

SuiteKind parse_suite(const std::string& name) {
  if (name == "burgers" || name == "shifted-burgers") return SuiteKind::ShiftedBurgers;
  if (name == "euler" || name == "lagrangian-euler") return SuiteKind::LagrangianEuler;
  if (name == "p-system") return SuiteKind::PSystem;
  throw Error(ErrorKind::InvalidArgument, "unknown suite '" + name + "'");
}

const char* to_string(SuiteKind kind) {
  switch (kind) {
    case SuiteKind::ShiftedBurgers: return "shifted-burgers";
    case SuiteKind::LagrangianEuler: return "lagrangian-euler";
    case SuiteKind::PSystem: return "p-system";
  }
  return "?";
}

namespace {

Datum random_steps(const State& base, const State& amplitude, int pieces, double spacing,
                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Datum d;
  for (int i = 0; i < pieces; ++i) {
    State v = base;
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] += amplitude[j] * u(rng);
    if (i > 0) d.breaks.push_back(spacing * i);
    d.values.push_back(v);
  }
  return d;
}

// Pulls every value of both data towards `base` so the size is at most `size`.
void shrink(Datum& v0, Datum& vb, const State& base, double size) {
  const double now = initial_data_size(v0, vb);
  if (now <= size) return;
  const double k = size / now;
  for (State& v : v0.values) v = base + k * (v - base);
  for (State& v : vb.values) v = base + k * (v - base);
}

}  // namespace

RandomCase random_case(SuiteKind kind, std::uint64_t seed, std::size_t index, double data_size) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(kind)};
  std::mt19937_64 rng(seq);
  RandomCase c;
  switch (kind) {
    case SuiteKind::ShiftedBurgers: {
      // lambda(u) = u - 1/2 vanishes at the reference state: the boundary
      // is characteristic. Data sit slightly left of it so most fronts
      // move towards the boundary.
      c.sys = make_burgers(0.5, 0.5, 1.0);
      const State base = State::Constant(1, 0.485);
      const State amp = State::Constant(1, 0.02);
      c.initial = random_steps(base, amp, 8, 0.04, rng);
      c.boundary = random_steps(State::Constant(1, 0.5), amp, 2, 5.0, rng);
      c.t_end = 30.0;
      break;
    }
    case SuiteKind::LagrangianEuler: {
      c.sys = make_lagrangian_euler();
      const State& base = c.sys->reference;
      State amp(3);
      amp << 0.01, 0.01, 0.02;
      c.initial = random_steps(base, amp, 4, 0.15, rng);
      c.boundary = random_steps(base, amp, 2, 0.6, rng);
      c.t_end = 2.0;
      break;
    }
    case SuiteKind::PSystem: {
      c.sys = make_p_system();
      const State& base = c.sys->reference;
      const State amp = State::Constant(2, 0.005);
      c.initial = random_steps(base, amp, 4, 0.3, rng);
      c.boundary = random_steps(base, amp, 3, 0.4, rng);
      c.t_end = 2.0;
      break;
    }
  }
  shrink(c.initial, c.boundary, c.sys->reference, data_size);
  c.size = initial_data_size(c.initial, c.boundary);
  return c;
}

double SuiteResult::stability() const {
  if (fitted_c.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto [lo, hi] = std::minmax_element(fitted_c.begin(), fitted_c.end());
  return *hi / *lo;
}

SuiteResult estimate_suite(SuiteKind kind, std::uint64_t seed, std::size_t n_runs,
                           const std::vector<double>& deltas, int jobs) {
  SuiteResult out;
  out.kind = kind;
  out.deltas = deltas;
  const int workers = resolve_jobs(jobs);
  for (const double delta : deltas) {
    struct RunHits {
      std::vector<ScatterPoint> points;
      bool aborted = false;
      std::string message;
    };
    std::function<RunHits(std::size_t)> fn = [&](std::size_t i) {
      RunHits rh;
      const RandomCase c = random_case(kind, seed, i);
      FrontTrackingOptions opts;
      opts.delta = delta;
      opts.t_end = c.t_end;
      const Trajectory traj = run(*c.sys, c.initial, c.boundary, opts);
      if (!traj.ok) {
        rh.aborted = true;
        rh.message = "run " + std::to_string(i) + ": " + to_string(traj.error_kind) + ": " + traj.error;
        return rh;
      }
      const double slack = 10.0 * delta * delta;
      for (const InteractionRecord& r : traj.records) {
        if (r.type != InteractionType::BoundaryHit) continue;
        if (kind == SuiteKind::ShiftedBurgers && !r.characteristic) continue;
        ScatterPoint p;
        p.delta = delta;
        p.run = i;
        p.t = r.t;
        p.family = r.family;
        p.characteristic = r.characteristic;
        for (double s : r.incoming) p.s += std::abs(s);
        p.varsigma_minus = std::max(-r.varsigma, 0.0);
        p.xi = std::abs(r.xi_pre);
        p.delta_v = r.delta_v;
        p.ratio = std::abs(r.delta_v) / (r.bound + slack);
        p.signed_ratio = r.delta_v / (r.bound + slack);
        rh.points.push_back(p);
      }
      return rh;
    };
    const auto results = parallel_map<RunHits>(workers, n_runs, fn);
    double fitted = 0.0, fitted_signed = -std::numeric_limits<double>::infinity();
    long hits = 0, aborted = 0;
    for (const RunHits& rh : results) {
      if (rh.aborted) {
        ++aborted;
        out.abort_messages.push_back(rh.message);
        continue;
      }
      for (const ScatterPoint& p : rh.points) {
        fitted = std::max(fitted, p.ratio);
        fitted_signed = std::max(fitted_signed, p.signed_ratio);
        out.scatter.push_back(p);
        ++hits;
      }
    }
    if (hits == 0) fitted_signed = 0.0;
    out.fitted_c.push_back(fitted);
    out.max_signed.push_back(fitted_signed);
    out.hits.push_back(hits);
    out.aborted.push_back(aborted);
  }
  return out;
}

std::string scatter_csv(const SuiteResult& r) {
  std::string out = "delta,run,t,family,characteristic,abs_s,varsigma_minus,abs_xi,delta_v,ratio,signed_ratio\n";
  for (const ScatterPoint& p : r.scatter) {
    out += fmt(p.delta) + "," + std::to_string(p.run) + "," + fmt(p.t) + "," +
           std::to_string(p.family + 1) + "," + (p.characteristic ? "1" : "0") + "," + fmt(p.s) +
           "," + fmt(p.varsigma_minus) + "," + fmt(p.xi) + "," + fmt(p.delta_v) + "," +
           fmt(p.ratio) + "," + fmt(p.signed_ratio) + "\n";
  }
  return out;
}

}  // namespace bfront
