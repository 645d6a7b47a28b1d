#include "sbl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>

#include "sbl/linalg.hpp"

namespace sbl {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ValidationError(join(path, key), "missing required field");
  return j.at(key);
}

void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ValidationError(join(path, it.key()), "unknown field");
  }
}

const json& require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path, "expected an object");
  return j;
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path, "expected a number");
  return j.get<double>();
}

int get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ValidationError(path, "expected an integer");
  return j.get<int>();
}

std::uint64_t get_seed(const json& j, const std::string& path) {
  // In-memory construction stores small literals as signed integers, so
  // checking for the unsigned storage type alone would reject them.
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  throw ValidationError(path, "expected a nonnegative integer");
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError(path, "expected a string");
  return j.get<std::string>();
}

// Complex scalars are plain numbers or [re, im] pairs.
Cx parse_complex(const json& j, const std::string& path) {
  if (j.is_number()) return Cx(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return Cx(j[0].get<double>(), j[1].get<double>());
  }
  throw ValidationError(path, "expected a number or an [re, im] pair");
}

CVec parse_cvec(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ValidationError(path, "expected a nonempty array");
  CVec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<long>(i)] = parse_complex(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

CMat parse_cmat(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ValidationError(path, "expected an array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  CMat m;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string rpath = path + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].empty()) throw ValidationError(rpath, "expected a nonempty row");
    if (r == 0) {
      cols = j[r].size();
      m.resize(static_cast<long>(rows), static_cast<long>(cols));
    } else if (j[r].size() != cols) {
      throw ValidationError(rpath, "ragged matrix rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<long>(r), static_cast<long>(c)) =
          parse_complex(j[r][c], rpath + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

CMat parse_hermitian(const json& j, const std::string& path) {
  CMat m = parse_cmat(j, path);
  if (m.rows() != m.cols()) throw ValidationError(path, "expected a square matrix");
  if (!is_hermitian(m)) throw ValidationError(path, "matrix is not Hermitian");
  return m;
}

ModelConfig parse_model(const json& j, const std::string& path) {
  require_object(j, path);
  ModelConfig m;
  m.kind = get_string(require(j, path, "kind"), join(path, "kind"));
  if (m.kind == "separable") {
    reject_unknown(j, path, {"kind", "h_a", "h_b"});
    m.h_a = parse_hermitian(require(j, path, "h_a"), join(path, "h_a"));
    m.h_b = parse_hermitian(require(j, path, "h_b"), join(path, "h_b"));
    m.dim_a = static_cast<int>(m.h_a.rows());
    m.dim_b = static_cast<int>(m.h_b.rows());
  } else if (m.kind == "measurement") {
    reject_unknown(j, path, {"kind", "conditional"});
    const json& cond = require(j, path, "conditional");
    if (!cond.is_array() || cond.size() < 2) {
      throw ValidationError(join(path, "conditional"),
                            "expected at least two conditional Hamiltonians");
    }
    for (std::size_t i = 0; i < cond.size(); ++i) {
      m.conditional.push_back(
          parse_hermitian(cond[i], join(path, "conditional[" + std::to_string(i) + "]")));
    }
    m.dim_a = static_cast<int>(m.conditional.size());
    m.dim_b = static_cast<int>(m.conditional.front().rows());
    for (const CMat& h : m.conditional) {
      if (h.rows() != m.dim_b) {
        throw ValidationError(join(path, "conditional"),
                              "conditional Hamiltonians must share one dimension");
      }
    }
  } else if (m.kind == "random") {
    reject_unknown(j, path, {"kind", "dim_a", "dim_b", "interaction_strength"});
    m.dim_a = get_int(require(j, path, "dim_a"), join(path, "dim_a"));
    m.dim_b = get_int(require(j, path, "dim_b"), join(path, "dim_b"));
    if (j.contains("interaction_strength")) {
      m.interaction_strength =
          get_number(j.at("interaction_strength"), join(path, "interaction_strength"));
    }
  } else if (m.kind == "explicit") {
    reject_unknown(j, path, {"kind", "dim_a", "dim_b", "h_total", "h_coupling",
                             "interaction_strength"});
    m.dim_a = get_int(require(j, path, "dim_a"), join(path, "dim_a"));
    m.dim_b = get_int(require(j, path, "dim_b"), join(path, "dim_b"));
    m.h_total = parse_hermitian(require(j, path, "h_total"), join(path, "h_total"));
    if (j.contains("h_coupling")) {
      m.h_coupling = parse_hermitian(j.at("h_coupling"), join(path, "h_coupling"));
      if (j.contains("interaction_strength")) {
        m.interaction_strength =
            get_number(j.at("interaction_strength"), join(path, "interaction_strength"));
      }
    } else if (j.contains("interaction_strength")) {
      throw ValidationError(join(path, "interaction_strength"),
                            "set only together with h_coupling");
    }
    const long expected = static_cast<long>(m.dim_a) * m.dim_b;
    if (m.h_total.rows() != expected) {
      throw ValidationError(join(path, "h_total"), "size must equal dim_a*dim_b");
    }
    if (m.h_coupling.size() != 0 && m.h_coupling.rows() != expected) {
      throw ValidationError(join(path, "h_coupling"), "size must equal dim_a*dim_b");
    }
  } else {
    throw ValidationError(join(path, "kind"),
                          "expected one of separable, measurement, random, explicit");
  }
  if (m.dim_a < 2 || m.dim_b < 2) {
    throw ValidationError(path, "both subsystem dimensions must be at least 2");
  }
  return m;
}

InitialConfig parse_initial(const json& j, const std::string& path, const ModelConfig& model) {
  require_object(j, path);
  InitialConfig ini;
  ini.kind = get_string(require(j, path, "kind"), join(path, "kind"));
  if (ini.kind == "factorized") {
    reject_unknown(j, path, {"kind", "state_a", "state_b"});
    ini.state_a = parse_cvec(require(j, path, "state_a"), join(path, "state_a"));
    ini.state_b = parse_cvec(require(j, path, "state_b"), join(path, "state_b"));
    if (ini.state_a.size() != model.dim_a) {
      throw ValidationError(join(path, "state_a"), "length must equal model.dim_a");
    }
    if (ini.state_b.size() != model.dim_b) {
      throw ValidationError(join(path, "state_b"), "length must equal model.dim_b");
    }
  } else if (ini.kind == "pointer_superposition") {
    reject_unknown(j, path, {"kind", "branch_a", "branch_b", "env"});
    ini.branch_a = get_int(require(j, path, "branch_a"), join(path, "branch_a"));
    ini.branch_b = get_int(require(j, path, "branch_b"), join(path, "branch_b"));
    if (ini.branch_a < 0 || ini.branch_a >= model.dim_a || ini.branch_b < 0 ||
        ini.branch_b >= model.dim_a || ini.branch_a == ini.branch_b) {
      throw ValidationError(path, "branch indices must be distinct and inside [0, dim_a)");
    }
    if (j.contains("env")) {
      ini.env = parse_cvec(j.at("env"), join(path, "env"));
      if (ini.env.size() != model.dim_b) {
        throw ValidationError(join(path, "env"), "length must equal model.dim_b");
      }
    }
  } else if (ini.kind == "random") {
    reject_unknown(j, path, {"kind"});
  } else if (ini.kind == "basis") {
    reject_unknown(j, path, {"kind", "index_a", "index_b"});
    if (j.contains("index_a")) ini.index_a = get_int(j.at("index_a"), join(path, "index_a"));
    if (j.contains("index_b")) ini.index_b = get_int(j.at("index_b"), join(path, "index_b"));
    if (ini.index_a < 0 || ini.index_a >= model.dim_a) {
      throw ValidationError(join(path, "index_a"), "outside [0, dim_a)");
    }
    if (ini.index_b < 0 || ini.index_b >= model.dim_b) {
      throw ValidationError(join(path, "index_b"), "outside [0, dim_b)");
    }
  } else if (ini.kind == "explicit") {
    reject_unknown(j, path, {"kind", "state"});
    ini.state = parse_cvec(require(j, path, "state"), join(path, "state"));
    if (ini.state.size() != static_cast<long>(model.dim_a) * model.dim_b) {
      throw ValidationError(join(path, "state"), "length must equal dim_a*dim_b");
    }
  } else {
    throw ValidationError(
        join(path, "kind"),
        "expected one of factorized, pointer_superposition, random, basis, explicit");
  }
  return ini;
}

CVec normalized_or_throw(CVec v, const std::string& path) {
  const double n = v.norm();
  if (std::abs(n - 1.0) > 1e-6) {
    throw ValidationError(path, "state must be normalized (|norm - 1| <= 1e-6)");
  }
  return v / n;
}

std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError(file.string(), "cannot open for writing");
  out << text;
  if (!out) throw ValidationError(file.string(), "write failed");
}

// Deterministic event order for serialization.
void sort_events(EventLog& events) {
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    if (a.branch_a != b.branch_a) return a.branch_a < b.branch_a;
    return a.branch_b < b.branch_b;
  });
}

std::string events_jsonl(const EventLog& events) {
  std::string out;
  for (const Event& e : events) {
    ordered_json line;
    line["kind"] = event_kind_name(e.kind);
    line["t"] = e.t;
    line["branch_a"] = e.branch_a;
    line["branch_b"] = e.branch_b;
    line["gap"] = e.gap;
    out += line.dump();
    out += '\n';
  }
  return out;
}

double min_pair_gap(const RVec& p) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.size(); ++i) {
    for (int j = i + 1; j < p.size(); ++j) best = std::min(best, std::abs(p[i] - p[j]));
  }
  return std::isfinite(best) ? best : 0.0;
}

}  // namespace

ScenarioConfig parse_scenario_config(const json& j, const std::string& fallback_name) {
  require_object(j, "config");
  reject_unknown(j, "", {"name", "seed", "hbar", "model", "initial", "time", "integrator",
                         "events"});
  ScenarioConfig cfg;
  cfg.raw = j;
  cfg.name = fallback_name.empty() ? "scenario" : fallback_name;
  if (j.contains("name")) cfg.name = get_string(j.at("name"), "name");
  if (cfg.name.empty() || cfg.name.find('/') != std::string::npos) {
    throw ValidationError("name", "must be a nonempty name without slashes");
  }
  if (j.contains("seed")) cfg.seed = get_seed(j.at("seed"), "seed");
  if (j.contains("hbar")) {
    cfg.hbar = get_number(j.at("hbar"), "hbar");
    if (!(cfg.hbar > 0.0)) throw ValidationError("hbar", "must be positive");
  }

  cfg.model = parse_model(require(j, "", "model"), "model");
  cfg.initial = parse_initial(require(j, "", "initial"), "initial", cfg.model);

  const json& time = require_object(require(j, "", "time"), "time");
  reject_unknown(time, "time", {"t_max", "steps"});
  cfg.t_max = get_number(require(time, "time", "t_max"), "time.t_max");
  if (!(cfg.t_max > 0.0)) throw ValidationError("time.t_max", "must be positive");
  if (time.contains("steps")) {
    cfg.steps = get_int(time.at("steps"), "time.steps");
    if (cfg.steps < 2) throw ValidationError("time.steps", "need at least 2 steps");
  }

  if (j.contains("integrator")) {
    const json& ig = require_object(j.at("integrator"), "integrator");
    reject_unknown(ig, "integrator",
                   {"rtol", "atol", "eps_gap", "max_step", "min_step", "on_resonance"});
    IntegratorOptions& o = cfg.integrator;
    if (ig.contains("rtol")) o.rtol = get_number(ig.at("rtol"), "integrator.rtol");
    if (ig.contains("atol")) o.atol = get_number(ig.at("atol"), "integrator.atol");
    if (ig.contains("eps_gap")) o.eps_gap = get_number(ig.at("eps_gap"), "integrator.eps_gap");
    if (ig.contains("max_step")) o.max_step = get_number(ig.at("max_step"), "integrator.max_step");
    if (ig.contains("min_step")) o.min_step = get_number(ig.at("min_step"), "integrator.min_step");
    if (!(o.rtol > 0.0) || !(o.atol > 0.0)) {
      throw ValidationError("integrator", "tolerances must be positive");
    }
    if (!(o.min_step > 0.0) || !(o.max_step > o.min_step)) {
      throw ValidationError("integrator", "need 0 < min_step < max_step");
    }
    if (ig.contains("on_resonance")) {
      const std::string p = get_string(ig.at("on_resonance"), "integrator.on_resonance");
      if (p == "halt") {
        o.on_resonance = ResonancePolicy::Halt;
      } else if (p == "reseed") {
        o.on_resonance = ResonancePolicy::Reseed;
      } else {
        throw ValidationError("integrator.on_resonance", "expected \"halt\" or \"reseed\"");
      }
    }
  }

  if (j.contains("events")) {
    const json& ev = require_object(j.at("events"), "events");
    reject_unknown(ev, "events", {"gap_threshold"});
    if (ev.contains("gap_threshold")) {
      cfg.gap_threshold = get_number(ev.at("gap_threshold"), "events.gap_threshold");
      if (!(cfg.gap_threshold > 0.0)) {
        throw ValidationError("events.gap_threshold", "must be positive");
      }
    }
  }
  return cfg;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string(), "cannot open config file");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string(), std::string("JSON parse error: ") + e.what());
  }
  return parse_scenario_config(j, path.stem().string());
}

BipartiteModel realize_model(const ScenarioConfig& cfg) {
  const ModelConfig& m = cfg.model;
  if (m.kind == "separable") return build_separable(m.h_a, m.h_b, cfg.hbar);
  if (m.kind == "measurement") {
    return build_measurement(computational_pointer(m.conditional), cfg.hbar);
  }
  if (m.kind == "random") {
    return build_random(m.dim_a, m.dim_b, m.interaction_strength, cfg.seed, cfg.hbar);
  }
  CMat h = m.h_total;
  if (m.h_coupling.size() != 0) h += m.interaction_strength * m.h_coupling;
  return make_model(m.dim_a, m.dim_b, h, cfg.hbar);
}

CVec realize_initial(const ScenarioConfig& cfg, const BipartiteModel& model) {
  const InitialConfig& ini = cfg.initial;
  if (ini.kind == "factorized") {
    return initial_factorized(normalized_or_throw(ini.state_a, "initial.state_a"),
                              normalized_or_throw(ini.state_b, "initial.state_b"));
  }
  if (ini.kind == "pointer_superposition") {
    CVec env = ini.env;
    if (env.size() == 0) {
      env = basis_vector(model.dim_b, 0);
    } else {
      env = normalized_or_throw(env, "initial.env");
    }
    PointerBasis pointer;
    pointer.states = CMat::Identity(model.dim_a, model.dim_a);
    pointer.conditional.assign(model.dim_a, CMat::Zero(model.dim_b, model.dim_b));
    return initial_pointer_superposition(pointer, ini.branch_a, ini.branch_b, env);
  }
  if (ini.kind == "random") return initial_random(model.dim_a, model.dim_b, cfg.seed);
  if (ini.kind == "basis") {
    return initial_factorized(basis_vector(model.dim_a, ini.index_a),
                              basis_vector(model.dim_b, ini.index_b));
  }
  return normalized_or_throw(ini.state, "initial.state");
}

std::filesystem::path resolve_out_dir(const std::string& cli_out, const std::string& name) {
  if (!cli_out.empty()) return cli_out;
  if (const char* env = std::getenv("SBL_OUT"); env != nullptr && *env != '\0') {
    return std::filesystem::path(env) / name;
  }
  return std::filesystem::path(name);
}

namespace {

struct RunData {
  BipartiteModel model;
  std::vector<double> times;
  SchmidtTrajectory traj;
  EventLog events;
  std::vector<double> entropy;
  std::vector<double> min_gap;
};

RunData execute(const ScenarioConfig& cfg) {
  RunData d;
  d.model = realize_model(cfg);
  const CVec psi0 = realize_initial(cfg, d.model);
  d.times = default_time_grid(d.model, 0.0, cfg.t_max, cfg.steps);
  const std::vector<CVec> states = evolve_exact(d.model, psi0, d.times);
  d.traj = schmidt_trajectory(states, d.times, d.model.dim_a, d.model.dim_b);
  d.events = detect_events(d.traj, cfg.gap_threshold);
  d.events.insert(d.events.end(), d.traj.events.begin(), d.traj.events.end());
  sort_events(d.events);
  d.entropy.reserve(d.times.size());
  d.min_gap.reserve(d.times.size());
  for (const SchmidtForm& f : d.traj.forms) {
    const RVec p = f.probabilities();
    double s = 0.0;
    for (int i = 0; i < p.size(); ++i) {
      if (p[i] > 0.0) s -= p[i] * std::log(p[i]);
    }
    d.entropy.push_back(s);
    d.min_gap.push_back(min_pair_gap(p));
  }
  return d;
}

std::string trajectory_csv(const RunData& d) {
  std::string csv = "t,branch,p,sqrt_p,entropy,min_gap\n";
  for (std::size_t k = 0; k < d.times.size(); ++k) {
    const SchmidtForm& f = d.traj.forms[k];
    for (int s = 0; s < f.branches(); ++s) {
      csv += fmt_g(d.times[k]);
      csv += ',';
      csv += std::to_string(d.traj.branch_ids[k][s]);
      csv += ',';
      csv += fmt_g(f.coeffs[s] * f.coeffs[s]);
      csv += ',';
      csv += fmt_g(f.coeffs[s]);
      csv += ',';
      csv += fmt_g(d.entropy[k]);
      csv += ',';
      csv += fmt_g(d.min_gap[k]);
      csv += '\n';
    }
  }
  return csv;
}

ordered_json report_json(const ScenarioConfig& cfg, const RunData& d) {
  ordered_json rep;
  rep["name"] = cfg.name;
  rep["seed"] = cfg.seed;
  rep["hbar"] = cfg.hbar;
  rep["model"] = {{"kind", cfg.model.kind},
                  {"dim_a", d.model.dim_a},
                  {"dim_b", d.model.dim_b}};
  rep["time"] = {{"t_max", cfg.t_max},
                 {"steps", static_cast<int>(d.times.size()) - 1},
                 {"samples", d.times.size()}};
  rep["branches"] = d.traj.branches();
  ordered_json by_kind = ordered_json::object();
  for (EventKind k : {EventKind::AvoidedCrossing, EventKind::Degeneracy, EventKind::Recombination,
                      EventKind::GaugeJump}) {
    const long n = std::count_if(d.events.begin(), d.events.end(),
                                 [k](const Event& e) { return e.kind == k; });
    by_kind[event_kind_name(k)] = n;
  }
  rep["events"] = {{"total", d.events.size()}, {"by_kind", by_kind}};
  const std::size_t last = d.times.size() - 1;
  ordered_json fin;
  fin["t"] = d.times[last];
  fin["entropy"] = d.entropy[last];
  fin["branch"] = d.traj.branch_ids[last];
  std::vector<double> p(d.traj.forms[last].branches());
  for (int s = 0; s < d.traj.forms[last].branches(); ++s) {
    p[static_cast<std::size_t>(s)] = d.traj.forms[last].coeffs[s] * d.traj.forms[last].coeffs[s];
  }
  fin["p"] = p;
  rep["final"] = fin;
  return rep;
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  RunData d = execute(cfg);
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "trajectory.csv", trajectory_csv(d));
  write_text(out_dir / "events.jsonl", events_jsonl(d.events));
  write_text(out_dir / "report.json", report_json(cfg, d).dump(2) + "\n");
  RunResult res;
  res.out_dir = out_dir;
  res.trajectory = std::move(d.traj);
  res.events = std::move(d.events);
  res.final_entropy = d.entropy.back();
  return res;
}

SweepResult run_sweep(const ScenarioConfig& base, const std::string& param,
                      const std::vector<double>& values, const std::filesystem::path& out_dir) {
  if (values.empty()) throw ValidationError("values", "sweep needs at least one value");
  if (param.empty()) throw ValidationError("param", "sweep needs a config field path");
  std::string pointer = "/" + param;
  std::replace(pointer.begin(), pointer.end(), '.', '/');
  const json::json_pointer ptr(pointer);
  if (!base.raw.contains(ptr)) {
    throw ValidationError(param, "no such config field to sweep");
  }

  SweepResult res;
  res.out_dir = out_dir;
  std::filesystem::create_directories(out_dir);
  std::string summary = "index,value,seed,branches,events,final_entropy,min_gap\n";
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    json j = base.raw;
    j[ptr] = values[idx];
    ScenarioConfig cfg = parse_scenario_config(j, base.name);
    cfg.seed = cfg.seed ^ static_cast<std::uint64_t>(idx);

    char tag[16];
    std::snprintf(tag, sizeof tag, "run_%03zu", idx);
    const std::filesystem::path run_dir = out_dir / tag;
    RunData d = execute(cfg);
    std::filesystem::create_directories(run_dir);
    write_text(run_dir / "trajectory.csv", trajectory_csv(d));
    write_text(run_dir / "events.jsonl", events_jsonl(d.events));
    write_text(run_dir / "report.json", report_json(cfg, d).dump(2) + "\n");
    res.run_dirs.push_back(run_dir);

    const double overall_gap = *std::min_element(d.min_gap.begin(), d.min_gap.end());
    summary += std::to_string(idx);
    summary += ',';
    summary += fmt_g(values[idx]);
    summary += ',';
    summary += std::to_string(cfg.seed);
    summary += ',';
    summary += std::to_string(d.traj.branches());
    summary += ',';
    summary += std::to_string(d.events.size());
    summary += ',';
    summary += fmt_g(d.entropy.back());
    summary += ',';
    summary += fmt_g(overall_gap);
    summary += '\n';
  }
  write_text(out_dir / "sweep_summary.csv", summary);
  return res;
}

CompareResult compare_dynamics(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  BipartiteModel model = realize_model(cfg);
  const CVec psi0 = realize_initial(cfg, model);
  const std::vector<double> times = default_time_grid(model, 0.0, cfg.t_max, cfg.steps);
  const std::vector<CVec> states = evolve_exact(model, psi0, times);
  SchmidtTrajectory exact = schmidt_trajectory(states, times, model.dim_a, model.dim_b);
  EventLog events = detect_events(exact, cfg.gap_threshold);

  int start = -1;
  for (std::size_t k = 0; k < exact.forms.size(); ++k) {
    if (exact.forms[k].rank == exact.forms[k].branches()) {
      start = static_cast<int>(k);
      break;
    }
  }
  if (start < 0) {
    throw ValidationError("initial",
                          "trajectory never reaches full Schmidt rank; the flow route "
                          "has nothing to integrate");
  }

  const std::vector<double> flow_times(times.begin() + start, times.end());
  SchmidtTrajectory flow = integrate_schmidt(model, exact.forms[static_cast<std::size_t>(start)],
                                             flow_times, cfg.integrator);

  CompareResult res;
  res.out_dir = out_dir;
  res.start_index = start;
  res.halted = flow.times.size() < flow_times.size();
  res.events_exact = static_cast<int>(events.size());
  res.events_flow = static_cast<int>(flow.events.size());

  // Flag every sample within three grid steps of any event on either route.
  const double spacing = (times.back() - times.front()) / double(times.size() - 1);
  const double window = 3.0 * spacing;
  EventLog all_events = events;
  all_events.insert(all_events.end(), flow.events.begin(), flow.events.end());
  auto flagged = [&](double t) {
    for (const Event& e : all_events) {
      if (std::abs(t - e.t) <= window) return true;
    }
    return false;
  };

  std::string csv = "t,fidelity,max_p_diff,flagged\n";
  for (std::size_t i = 0; i < flow.times.size(); ++i) {
    const std::size_t k = static_cast<std::size_t>(start) + i;
    const CVec psi_flow = flow.forms[i].reconstruct();
    const double fid = std::norm(states[k].dot(psi_flow));
    double pdiff = 0.0;
    for (int s = 0; s < exact.forms[k].branches(); ++s) {
      const double pa = exact.forms[k].coeffs[s] * exact.forms[k].coeffs[s];
      const double pb = flow.forms[i].coeffs[s] * flow.forms[i].coeffs[s];
      pdiff = std::max(pdiff, std::abs(pa - pb));
    }
    const bool flag = flagged(times[k]);
    if (!flag) {
      res.max_fidelity_error = std::max(res.max_fidelity_error, 1.0 - fid);
      res.max_p_diff = std::max(res.max_p_diff, pdiff);
    }
    ++res.samples_compared;
    csv += fmt_g(times[k]);
    csv += ',';
    csv += fmt_g(fid);
    csv += ',';
    csv += fmt_g(pdiff);
    csv += ',';
    csv += flag ? '1' : '0';
    csv += '\n';
  }

  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "compare.csv", csv);
  ordered_json rep;
  rep["name"] = cfg.name;
  rep["seed"] = cfg.seed;
  rep["start_index"] = res.start_index;
  rep["start_t"] = times[static_cast<std::size_t>(start)];
  rep["samples_compared"] = res.samples_compared;
  rep["max_fidelity_error"] = res.max_fidelity_error;
  rep["max_p_diff"] = res.max_p_diff;
  rep["halted"] = res.halted;
  rep["events_exact"] = res.events_exact;
  rep["events_flow"] = res.events_flow;
  write_text(out_dir / "compare.json", rep.dump(2) + "\n");
  return res;
}

}  // namespace sbl
