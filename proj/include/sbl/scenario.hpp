#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbl/model.hpp"
#include "sbl/propagation.hpp"
#include "sbl/schmidt_dynamics.hpp"

namespace sbl {

// JSON scenario schema (comments in config files are allowed):
//
// {
//   "name": "demo",                 // optional, defaults to the file stem
//   "seed": 1,                      // optional, unsigned
//   "hbar": 1.0,                    // optional, > 0
//   "model": {
//     "kind": "random",             // separable | measurement | random | explicit
//     "dim_a": 2, "dim_b": 4,       // random, explicit
//     "interaction_strength": 0.5,  // random; explicit with h_coupling
//     "h_a": [[0,1],[1,0]],         // separable (complex entries: x or [re,im])
//     "h_b": [...],                 // separable
//     "conditional": [[...], ...],  // measurement: one env Hamiltonian per pointer state
//     "h_total": [...],             // explicit
//     "h_coupling": [...]           // explicit, optional
//   },
//   "initial": {
//     "kind": "factorized",         // factorized | pointer_superposition | random | basis | explicit
//     "state_a": [...], "state_b": [...],
//     "branch_a": 0, "branch_b": 1, "env": [...],
//     "index_a": 0, "index_b": 0,
//     "state": [...]
//   },
//   "time": { "t_max": 6.28, "steps": 400 },  // steps optional: spectral default
//   "integrator": { "rtol": 1e-9, "atol": 1e-12, "eps_gap": 1e-6,
//                   "max_step": 0.1, "min_step": 1e-12, "on_resonance": "reseed" },
//   "events": { "gap_threshold": 1e-3 }
// }
//
// Unknown keys anywhere are rejected. Validation failures throw
// ValidationError with the offending field path.
struct ModelConfig {
  std::string kind;
  int dim_a = 0;
  int dim_b = 0;
  double interaction_strength = 1.0;
  CMat h_a, h_b;
  std::vector<CMat> conditional;
  CMat h_total, h_coupling;
};

struct InitialConfig {
  std::string kind;
  CVec state_a, state_b;
  int branch_a = 0;
  int branch_b = 1;
  CVec env;
  int index_a = 0;
  int index_b = 0;
  CVec state;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  double hbar = 1.0;
  ModelConfig model;
  InitialConfig initial;
  double t_max = 1.0;
  int steps = 0;  // 0: derive the grid from the spectral norm
  IntegratorOptions integrator;
  double gap_threshold = tol::gap_threshold_default;
  nlohmann::json raw;  // parsed source, kept for sweeps
};

ScenarioConfig parse_scenario_config(const nlohmann::json& j, const std::string& fallback_name);
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

BipartiteModel realize_model(const ScenarioConfig& cfg);
CVec realize_initial(const ScenarioConfig& cfg, const BipartiteModel& model);

// Output directory precedence: explicit flag, then $SBL_OUT/<name>, then
// ./<name>.
std::filesystem::path resolve_out_dir(const std::string& cli_out, const std::string& name);

// Exact evolution, branch tracking and the event scan; writes trajectory.csv
// (header t,branch,p,sqrt_p,entropy,min_gap, 17 significant digits),
// events.jsonl and report.json into out_dir. Reruns with the same config and
// seed produce byte-identical artifacts.
struct RunResult {
  std::filesystem::path out_dir;
  SchmidtTrajectory trajectory;
  EventLog events;  // trajectory gauge jumps merged with the detector's list
  double final_entropy = 0.0;
};

RunResult run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

// One run per value with the dot-path field overridden (the field must exist
// in the config file) and the seed XORed with the run index. Per-run
// artifacts land in run_000, run_001, ... and sweep_summary.csv collects one
// row per run.
struct SweepResult {
  std::filesystem::path out_dir;
  std::vector<std::filesystem::path> run_dirs;
};

SweepResult run_sweep(const ScenarioConfig& base, const std::string& param,
                      const std::vector<double>& values, const std::filesystem::path& out_dir);

// Exact route against the branch-flow route started at the first full-rank
// sample. Writes compare.csv (t,fidelity,max_p_diff,flagged) and compare.json.
// Samples within three grid steps of any detected event are flagged and
// excluded from the headline error numbers.
struct CompareResult {
  std::filesystem::path out_dir;
  int start_index = -1;
  int samples_compared = 0;
  double max_fidelity_error = 0.0;  // over unflagged samples
  double max_p_diff = 0.0;          // over unflagged samples
  bool halted = false;
  int events_exact = 0;
  int events_flow = 0;
};

CompareResult compare_dynamics(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace sbl
