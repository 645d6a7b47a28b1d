// End-to-end acceptance checks. Usage: acceptance <cli-binary> <scratch-dir>
//
// Prints one [PASS]/[FAIL] line per numbered criterion and exits with the
// number of failures. Tolerances are pinned here on purpose; loosening them
// is a behavior change, not a test fix.

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbl/analysis.hpp"
#include "sbl/linalg.hpp"
#include "sbl/model.hpp"
#include "sbl/propagation.hpp"
#include "sbl/rng.hpp"
#include "sbl/scenario.hpp"
#include "sbl/schmidt_dynamics.hpp"

using namespace sbl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

std::string fmt17(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::string("<unreadable: ") + file.string() + ">";
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << text;
}

int run_cli(const std::string& cli, const std::string& args, const fs::path& log) {
  const std::string cmd = cli + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status < 0) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

// ---------------------------------------------------------------- criterion 1

bool criterion_1(std::string& detail) {
  const int dims[] = {2, 3, 4, 8};
  double worst_recon = 0.0, worst_spec = 0.0;
  int count = 0;
  for (std::uint64_t seed = 0; count < 100; ++seed) {
    const int da = dims[seed % 4];
    const int db = dims[(seed / 4) % 4];
    CVec psi = initial_random(da, db, 900 + seed);
    SchmidtForm f = schmidt_decompose(psi, da, db);
    worst_recon = std::max(worst_recon, (f.reconstruct() - psi).norm());

    CMat rho = partial_trace(psi, da, db, 0);
    EigResult eig = hermitian_eigendecomposition(rho);
    RVec lam = eig.values.reverse();  // descending
    RVec p = f.probabilities();
    for (int i = 0; i < p.size(); ++i) {
      worst_spec = std::max(worst_spec, std::abs(p[i] - lam[i]));
    }
    for (int i = p.size(); i < lam.size(); ++i) {
      worst_spec = std::max(worst_spec, std::abs(lam[i]));
    }
    ++count;
  }
  detail = "max reconstruction " + fmt(worst_recon) + ", max spectrum mismatch " + fmt(worst_spec);
  return worst_recon <= 1e-10 && worst_spec <= 1e-10;
}

// ---------------------------------------------------------------- criterion 2

bool criterion_2(const fs::path& scratch, std::string& detail) {
  double worst_fid_err = 0.0;
  int failures = 0;
  for (int k = 0; k < 20; ++k) {
    json j = {{"seed", 1000 + k},
              {"model", {{"kind", "random"}, {"dim_a", 3}, {"dim_b", 3}}},
              {"initial", {{"kind", "random"}}},
              {"time", {{"t_max", 1.0}, {"steps", 50}}}};
    ScenarioConfig cfg = parse_scenario_config(j, "flow_check");
    try {
      CompareResult res = compare_dynamics(cfg, scratch / ("flow_" + std::to_string(k)));
      worst_fid_err = std::max(worst_fid_err, res.max_fidelity_error);
      if (res.max_fidelity_error > 1e-6) ++failures;
    } catch (const std::exception& e) {
      ++failures;
      detail = std::string("seed ") + std::to_string(1000 + k) + " threw: " + e.what();
      return false;
    }
  }

  // Two-spin flip-flip coupling: the weights follow cos^2/sin^2 through the
  // crossing, starting from an already entangled sample.
  CMat sx(2, 2);
  sx << 0, 1, 1, 0;
  BipartiteModel m = make_model(2, 2, tensor_op(sx, sx));
  CVec psi0 = CVec::Zero(4);
  psi0[0] = std::cos(0.1);
  psi0[3] = Cx(0, -std::sin(0.1));
  SchmidtForm f0 = schmidt_decompose(psi0, 2, 2);
  std::vector<double> times;
  for (int k = 0; k <= 52; ++k) times.push_back(0.1 + 1.3 * k / 52.0);
  IntegratorOptions opts;
  opts.rtol = 1e-11;
  opts.atol = 1e-14;
  SchmidtTrajectory traj = integrate_schmidt(m, f0, times, opts);
  double worst_p = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double c2 = std::cos(times[k]) * std::cos(times[k]);
    worst_p = std::max(worst_p, std::abs(traj.probability(static_cast<int>(k), 0) - c2));
  }

  detail = "max fidelity error " + fmt(worst_fid_err) + " over 20 models, two-spin weight error " +
           fmt(worst_p);
  return failures == 0 && worst_p <= 1e-8;
}

// ---------------------------------------------------------------- criterion 3

bool criterion_3(std::string& detail) {
  const int shapes[][2] = {{3, 3}, {2, 4}, {4, 2}, {2, 2}, {3, 4}};
  double worst_exact = 0.0, worst_fd = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int da = shapes[k % 5][0];
    const int db = shapes[k % 5][1];
    BipartiteModel m = build_random(da, db, 1.0, 2000 + k);
    CVec psi = initial_random(da, db, 2100 + k);
    SchmidtForm f = schmidt_decompose(psi, da, db);

    CMat rho = psi * psi.adjoint();
    CMat comm = m.h * rho - rho * m.h;
    for (int side : {0, 1}) {
      const int keep = side == 0 ? da : db;
      const int other = side == 0 ? db : da;
      CMat traced = CMat::Zero(keep, keep);
      for (int x = 0; x < keep; ++x) {
        for (int y = 0; y < keep; ++y) {
          for (int s = 0; s < other; ++s) {
            const long row = side == 0 ? x * db + s : s * db + x;
            const long col = side == 0 ? y * db + s : s * db + y;
            traced(x, y) += comm(row, col);
          }
        }
      }
      CMat flow = reduced_density_flow(f, m, side);
      worst_exact = std::max(worst_exact, (flow - traced).cwiseAbs().maxCoeff());
    }

    // Central finite difference of the right-reduced density matrix.
    const double t0 = 0.3, dt = 1e-4;
    std::vector<CVec> states = evolve_exact(m, psi, {t0 - dt, t0, t0 + dt});
    CMat rho_m = partial_trace(states[0], da, db, 1);
    CMat rho_p = partial_trace(states[2], da, db, 1);
    CMat fd = (rho_p - rho_m) / (2.0 * dt);
    SchmidtForm f_mid = schmidt_decompose(states[1], da, db);
    CMat rhs = Cx(0, -1) * reduced_density_flow(f_mid, m, 1);  // hbar = 1
    worst_fd = std::max(worst_fd, (fd - rhs).cwiseAbs().maxCoeff());
  }
  detail = "max commutator mismatch " + fmt(worst_exact) + ", max finite-difference mismatch " +
           fmt(worst_fd);
  return worst_exact <= 1e-10 && worst_fd <= 1e-6;
}

// ---------------------------------------------------------------- criterion 4

bool criterion_4(std::string& detail) {
  double worst_dp = 0.0, worst_diff = 0.0;
  for (int k = 0; k < 20; ++k) {
    Rng rng(3000 + k);
    const int da = 2 + k % 3;
    const int db = da + k % 2;  // half square, half with a larger environment
    PointerBasis pointer;
    pointer.states =
        (k < 10) ? CMat(CMat::Identity(da, da)) : CMat(random_unitary(da, rng));
    for (int i = 0; i < da; ++i) pointer.conditional.push_back(random_hermitian(db, rng));
    BipartiteModel m = build_measurement(pointer);

    const int rr = std::min(da, db);
    SchmidtForm f;
    f.coeffs = RVec(rr);
    double total = 0.0;
    for (int i = 0; i < rr; ++i) {
      f.coeffs[i] = 1.0 + i + 0.3 * rng.uniform();  // spaced, nondegenerate
      total += f.coeffs[i] * f.coeffs[i];
    }
    f.coeffs /= std::sqrt(total);
    std::sort(f.coeffs.data(), f.coeffs.data() + rr, std::greater<double>());
    f.left = pointer.states.leftCols(rr);
    f.right = random_unitary(db, rng).leftCols(rr);
    f.rank = rr;

    SchmidtDerivative full = schmidt_rhs(f, m);
    SchmidtDerivative locked = stable_branch_rhs(f, pointer, m);
    worst_dp = std::max({worst_dp, full.d_coeffs.cwiseAbs().maxCoeff(),
                         locked.d_coeffs.cwiseAbs().maxCoeff()});
    worst_diff = std::max({worst_diff, (full.d_coeffs - locked.d_coeffs).cwiseAbs().maxCoeff(),
                           (full.d_left - locked.d_left).cwiseAbs().maxCoeff(),
                           (full.d_right - locked.d_right).cwiseAbs().maxCoeff()});
  }
  detail = "max |d sqrt(p)| " + fmt(worst_dp) + ", max route disagreement " + fmt(worst_diff);
  return worst_dp <= 1e-10 && worst_diff <= 1e-8;
}

// ---------------------------------------------------------------- criterion 5

bool criterion_5(std::string& detail) {
  double worst_rel = 0.0;
  for (int k = 0; k < 20; ++k) {
    Rng rng(4000 + k);
    const int da = 2 + k % 3;
    const int db = 2 + (k / 3) % 3;
    BipartiteModel m;
    if (k < 10) {
      std::vector<CMat> cond;
      for (int i = 0; i < da; ++i) cond.push_back(random_hermitian(db, rng));
      m = build_measurement(computational_pointer(cond));
    } else {
      m = build_random(da, db, 1.0, 4100 + k);
    }
    CVec phi = random_state(da, rng);
    CVec env = random_state(db, rng);
    const double rate = entanglement_rate(m, orthonormal_completion(phi, da),
                                          orthonormal_completion(env, db), 0);
    if (rate < 1e-8) {
      detail = "degenerate test case: vanishing rate at model " + std::to_string(k);
      return false;
    }
    // Short window: the growth curve carries a genuine cubic term, so the
    // fit error scales linearly with the window length.
    EigResult eig = hermitian_eigendecomposition(m.h);
    const double t_max = 0.01 / eig.values.cwiseAbs().maxCoeff();
    const double a = quadratic_growth_fit(m, initial_factorized(phi, env), t_max, 8);
    worst_rel = std::max(worst_rel, std::abs(a - rate) / rate);
  }

  // Two-spin flip-flip coupling from a basis state: the rate is exactly one.
  CMat sx(2, 2);
  sx << 0, 1, 1, 0;
  BipartiteModel sxsx = make_model(2, 2, tensor_op(sx, sx));
  const double unit_rate =
      entanglement_rate(sxsx, CMat::Identity(2, 2), CMat::Identity(2, 2), 0);
  const double unit_fit =
      quadratic_growth_fit(sxsx, initial_factorized(basis_vector(2, 0), basis_vector(2, 0)),
                           0.05, 8);

  double worst_sep = 0.0;
  for (int k = 0; k < 5; ++k) {
    Rng rng(4300 + k);
    BipartiteModel m = build_separable(random_hermitian(3, rng), random_hermitian(3, rng));
    worst_sep = std::max(worst_sep,
                         entanglement_rate(m, random_unitary(3, rng), random_unitary(3, rng), 1));
  }

  // The closed form quoted for a two-branch superposition runs a constant
  // factor above the fitted growth; record the measured ratio.
  double ratio_lo = 1e9, ratio_hi = 0.0, ratio_sum = 0.0;
  for (int k = 0; k < 5; ++k) {
    Rng rng(4400 + k);
    std::vector<CMat> cond = {random_hermitian(3, rng), random_hermitian(3, rng)};
    BipartiteModel m = build_measurement(computational_pointer(cond));
    CVec env = random_state(3, rng);
    CVec sup(2);
    sup << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    const double quoted = entanglement_rate_superposition(cond[0], cond[1], env);
    EigResult eig = hermitian_eigendecomposition(m.h);
    const double a = quadratic_growth_fit(m, initial_factorized(sup, env),
                                          0.02 / eig.values.cwiseAbs().maxCoeff(), 8);
    const double ratio = quoted / a;
    ratio_lo = std::min(ratio_lo, ratio);
    ratio_hi = std::max(ratio_hi, ratio);
    ratio_sum += ratio;
  }

  detail = "max fit error " + fmt(worst_rel) + ", unit-coupling rate " + fmt17(unit_rate) +
           ", separable max " + fmt(worst_sep) + ", quoted/fit ratio mean " + fmt(ratio_sum / 5) +
           " in [" + fmt(ratio_lo) + ", " + fmt(ratio_hi) + "]";
  return worst_rel <= 0.01 && std::abs(unit_rate - 1.0) <= 1e-12 &&
         std::abs(unit_fit - 1.0) <= 0.01 && worst_sep <= 1e-10 && ratio_lo > 1.9 &&
         ratio_hi < 2.1;
}

// ---------------------------------------------------------------- criterion 6

namespace crossing_family {

// Pair-exchange coupling acting only on the aligned product states
// e_k (x) e_k, plus a tunable perturbation that connects this family to the
// rest of the space without detuning it.
BipartiteModel build(double lambda, std::uint64_t seed, double& t_cross) {
  Rng rng(seed);
  const double g = 0.8 + 0.4 * rng.uniform();
  const double d2 = rng.normal();
  const double theta = 2.0 * M_PI * rng.uniform();
  const double mu = rng.uniform();

  CMat h = CMat::Zero(9, 9);
  auto slot = [](int k) { return k * 3 + k; };
  h(slot(0), slot(1)) = g;
  h(slot(1), slot(0)) = g;
  h(slot(2), slot(2)) = d2;

  CMat x = CMat::Zero(3, 3);
  x(0, 1) = std::exp(Cx(0, theta));
  x(1, 0) = std::exp(Cx(0, -theta));
  CMat d = CMat::Zero(3, 3);
  d(1, 1) = 1.0;
  d(2, 2) = mu;
  h += lambda * tensor_op(x, d);

  t_cross = M_PI / (4.0 * g);
  return make_model(3, 3, h);
}

CVec start(std::uint64_t seed) {
  Rng rng(seed);
  RVec p(3);
  p << 0.55 + 0.05 * rng.uniform(), 0.30 + 0.03 * rng.uniform(), 0.15 + 0.02 * rng.uniform();
  p /= p.sum();
  CVec psi = CVec::Zero(9);
  for (int k = 0; k < 3; ++k) psi[k * 3 + k] = std::sqrt(p[k]);
  return psi;
}

}  // namespace crossing_family

bool criterion_6(std::string& detail) {
  double worst_exact_gap = 0.0;
  double narrowest_avoided = 1e9;
  double weakest_exchange = 1.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (double lambda : {0.0, 0.1}) {
      double t_cross = 0.0;
      BipartiteModel m = crossing_family::build(lambda, 5000 + seed, t_cross);
      CVec psi0 = crossing_family::start(5100 + seed);
      std::vector<double> times;
      const double t_end = 2.4 * t_cross;
      for (int k = 0; k <= 400; ++k) times.push_back(t_end * k / 400.0);
      std::vector<CVec> states = evolve_exact(m, psi0, times);
      SchmidtTrajectory traj = schmidt_trajectory(states, times, 3, 3);
      EventLog events = detect_events(traj);

      double sampled_gap = 1e9;
      for (const SchmidtForm& f : traj.forms) {
        sampled_gap = std::min(sampled_gap, std::abs(f.coeffs[0] * f.coeffs[0] -
                                                     f.coeffs[1] * f.coeffs[1]));
      }
      double event_gap = 1e9;
      for (const Event& e : events) {
        if (e.kind == EventKind::Degeneracy || e.kind == EventKind::AvoidedCrossing) {
          event_gap = std::min(event_gap, e.gap);
        }
      }
      const double min_gap = std::min(sampled_gap, event_gap);

      if (lambda == 0.0) {
        worst_exact_gap = std::max(worst_exact_gap, min_gap);
      } else {
        narrowest_avoided = std::min(narrowest_avoided, min_gap);
        // The top two sorted weight curves swap their subsystem character.
        const CMat& first = traj.forms.front().left;
        const CMat& last = traj.forms.back().left;
        const double swap_ov = std::abs(first.col(1).dot(last.col(0)));
        weakest_exchange = std::min(weakest_exchange, swap_ov);
      }
    }
  }
  detail = "exact-crossing max gap " + fmt(worst_exact_gap) + ", avoided min gap " +
           fmt(narrowest_avoided) + ", weakest exchange overlap " + fmt(weakest_exchange);
  return worst_exact_gap < 1e-8 && narrowest_avoided > 1e-8 && weakest_exchange > 0.9;
}

// ---------------------------------------------------------------- criterion 7

bool criterion_7(std::string& detail) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(6000 + seed);
    MemoryExpansion mem;
    mem.blocks = 2 + static_cast<int>(seed % 4);
    mem.block_size = 1 + static_cast<int>(seed % 3);
    const int alphas = 2 + static_cast<int>((seed / 4) % 4);
    for (int a = 0; a < alphas; ++a) {
      CMat cm(mem.blocks, mem.block_size);
      for (int n = 0; n < mem.blocks; ++n) {
        for (int m = 0; m < mem.block_size; ++m) cm(n, m) = rng.cnormal();
      }
      mem.c.push_back(cm / cm.norm());
    }
    RVec q(alphas);
    double qs = 0.0;
    for (int a = 0; a < alphas; ++a) {
      q[a] = rng.uniform() + 0.05;
      qs += q[a];
    }
    q /= qs;

    BranchingRatios br = branching_ratios(mem, q);
    worst = std::max(worst, (br.weight_direct - br.weight_projected).cwiseAbs().maxCoeff());
    for (int n = 0; n < mem.blocks; ++n) {
      for (int np = 0; np < mem.blocks; ++np) {
        if (std::isnan(br.ratio_direct(n, np))) continue;
        worst = std::max(worst, std::abs(br.ratio_direct(n, np) - br.ratio_projected(n, np)));
      }
    }
  }

  MemoryExpansion two;
  two.blocks = 2;
  two.block_size = 1;
  CMat c0(2, 1), c1(2, 1);
  c0 << 1.0, 0.0;
  c1 << std::sqrt(0.2), std::sqrt(0.8);
  two.c = {c0, c1};
  RVec q(2);
  q << 0.5, 0.5;
  const double worked = branching_ratios(two, q).ratio_direct(1, 0);

  detail = "max route mismatch " + fmt(worst) + ", worked two-level ratio " + fmt17(worked);
  return worst <= 1e-12 && std::abs(worked - 2.0 / 3.0) <= 1e-14;
}

// ---------------------------------------------------------------- criterion 8

bool criterion_8(std::string& detail) {
  // Orthogonal far states: the exact norms, the diagonal approximation and
  // the acted-on state agree.
  double worst_eq = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    ObservationScenario sc = build_observation_scenario(2, 3, 2, 2, 4, 7000 + seed);
    CVec post = observe(sc.psi_pre, sc.ops);
    const long env = long(sc.ops.dim_memory) * sc.dim_far;
    for (int i = 0; i < sc.branches; ++i) {
      RelativeNormInput in;
      in.p = sc.p[i];
      in.q = sc.q.row(i).transpose();
      in.c = sc.c[i];
      for (int n = 0; n < sc.blocks; ++n) {
        in.overlap.push_back(CMat::Identity(sc.alphas, sc.alphas));
      }
      RelativeNorms norms = relative_norms(in);
      for (int n = 0; n < sc.blocks; ++n) {
        const double measured =
            post.segment(long(sc.outcome_slot(i, n)) * env, env).squaredNorm();
        worst_eq = std::max({worst_eq, std::abs(norms.exact[n] - norms.approx[n]),
                             std::abs(norms.exact[n] - measured)});
      }
    }
  }

  // Fully phase-coherent far states: the diagonal approximation gains an
  // error that shrinks as the label count grows.
  auto mean_gap = [](int alphas, std::uint64_t seed) {
    Rng rng(seed);
    const int blocks = 3;
    double acc = 0.0;
    int count = 0;
    for (int r = 0; r < 200; ++r) {
      RelativeNormInput in;
      in.p = 1.0;
      in.q = RVec::Constant(alphas, 1.0 / alphas);
      for (int a = 0; a < alphas; ++a) {
        CMat cm(blocks, 1);
        for (int n = 0; n < blocks; ++n) cm(n, 0) = rng.cnormal();
        in.c.push_back(cm / cm.norm());
      }
      for (int n = 0; n < blocks; ++n) in.overlap.push_back(random_phase_gram(alphas, rng));
      RelativeNorms norms = relative_norms(in);
      for (int n = 0; n < blocks; ++n) {
        acc += std::abs(norms.exact[n] - norms.approx[n]);
        ++count;
      }
    }
    return acc / count;
  };
  const double g2 = mean_gap(2, 7100);
  const double g4 = mean_gap(4, 7200);
  const double g8 = mean_gap(8, 7300);
  const double g16 = mean_gap(16, 7400);

  detail = "orthogonal-case max mismatch " + fmt(worst_eq) + ", phase-case mean errors " +
           fmt(g2) + " > " + fmt(g4) + " > " + fmt(g8) + " > " + fmt(g16);
  return worst_eq <= 1e-12 && g2 > g4 && g4 > g8 && g8 > g16;
}

// ---------------------------------------------------------------- criterion 9

bool criterion_9(const std::string& cli, const fs::path& scratch, std::string& detail) {
  const fs::path dir = scratch / "cli";
  fs::create_directories(dir);

  spit(dir / "good.json", R"({
    // deterministic smoke scenario
    "name": "good",
    "seed": 77,
    "model": {"kind": "random", "dim_a": 2, "dim_b": 3},
    "initial": {"kind": "random"},
    "time": {"t_max": 0.8, "steps": 30}
  })");
  spit(dir / "bad.json", R"({
    "model": {"kind": "random", "dim_a": 2, "dim_b": 3, "bogus": 1},
    "initial": {"kind": "random"},
    "time": {"t_max": 0.8}
  })");
  spit(dir / "resonant.json", R"({
    "name": "resonant",
    "seed": 5,
    "model": {"kind": "random", "dim_a": 2, "dim_b": 2},
    "initial": {"kind": "explicit",
                "state": [0.70710678118654752, 0, 0, 0.70710678118654752]},
    "time": {"t_max": 0.3, "steps": 10}
  })");

  const int code_a = run_cli(cli, "run " + (dir / "good.json").string() + " --out " +
                                      (dir / "out_a").string(),
                             dir / "log_a.txt");
  const int code_b = run_cli(cli, "run " + (dir / "good.json").string() + " --out " +
                                      (dir / "out_b").string(),
                             dir / "log_b.txt");
  const int code_bad =
      run_cli(cli, "run " + (dir / "bad.json").string(), dir / "log_bad.txt");
  const int code_res = run_cli(cli, "compare " + (dir / "resonant.json").string() + " --out " +
                                        (dir / "out_res").string(),
                               dir / "log_res.txt");

  bool identical = true;
  for (const char* f : {"trajectory.csv", "events.jsonl", "report.json"}) {
    if (slurp(dir / "out_a" / f) != slurp(dir / "out_b" / f)) identical = false;
  }

  // Round-trip the CSV through strtod/strtol and reprint; the bytes must
  // survive.
  bool csv_ok = true;
  {
    std::istringstream csv(slurp(dir / "out_a" / "trajectory.csv"));
    std::string line;
    std::getline(csv, line);
    if (line != "t,branch,p,sqrt_p,entropy,min_gap") csv_ok = false;
    while (std::getline(csv, line)) {
      std::istringstream parts(line);
      std::string field;
      std::vector<std::string> rebuilt;
      int idx = 0;
      while (std::getline(parts, field, ',')) {
        if (idx == 1) {
          rebuilt.push_back(std::to_string(std::strtol(field.c_str(), nullptr, 10)));
        } else {
          rebuilt.push_back(fmt17(std::strtod(field.c_str(), nullptr)));
        }
        ++idx;
      }
      std::string joined;
      for (std::size_t i = 0; i < rebuilt.size(); ++i) {
        joined += rebuilt[i];
        if (i + 1 < rebuilt.size()) joined += ',';
      }
      if (idx != 6 || joined != line) csv_ok = false;
    }
  }

  // Event log lines and the report parse as JSON and reserialize unchanged.
  bool json_ok = true;
  {
    std::istringstream ev(slurp(dir / "out_a" / "events.jsonl"));
    std::string line;
    while (std::getline(ev, line)) {
      nlohmann::ordered_json e = nlohmann::ordered_json::parse(line, nullptr, false);
      if (e.is_discarded() || e.dump() != line) json_ok = false;
    }
    const std::string rep = slurp(dir / "out_a" / "report.json");
    nlohmann::ordered_json r = nlohmann::ordered_json::parse(rep, nullptr, false);
    if (r.is_discarded() || r.dump(2) + "\n" != rep) json_ok = false;
  }

  detail = "exit codes " + std::to_string(code_a) + "/" + std::to_string(code_bad) + "/" +
           std::to_string(code_res) + " (want 0/2/3), rerun identical: " +
           (identical ? "yes" : "no") + ", csv round-trip: " + (csv_ok ? "yes" : "no") +
           ", json round-trip: " + (json_ok ? "yes" : "no");
  return code_a == 0 && code_b == 0 && code_bad == 2 && code_res == 3 && identical && csv_ok &&
         json_ok;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <cli-binary> <scratch-dir>\n");
    return 64;
  }
  const std::string cli = argv[1];
  const fs::path scratch = argv[2];
  fs::create_directories(scratch);

  int failures = 0;
  auto report = [&](int num, const char* title, bool ok, const std::string& detail) {
    std::printf("[%s] %d. %s: %s\n", ok ? "PASS" : "FAIL", num, title, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  };

  std::string d;
  bool ok;

  ok = criterion_1(d);
  report(1, "decompositions rebuild their states and match the reduced spectra", ok, d);

  ok = criterion_2(scratch, d);
  report(2, "the branch flow tracks exact evolution", ok, d);

  ok = criterion_3(d);
  report(3, "the reduced flow equals the traced commutator and its finite difference", ok, d);

  ok = criterion_4(d);
  report(4, "pointer-aligned branches hold their weights, both routes agree", ok, d);

  ok = criterion_5(d);
  report(5, "deseparation rates match fitted short-time growth", ok, d);

  ok = criterion_6(d);
  report(6, "zero coupling crosses exactly, finite coupling avoids and swaps", ok, d);

  ok = criterion_7(d);
  report(7, "branching ratios agree between expansion and projector routes", ok, d);

  ok = criterion_8(d);
  report(8, "relative-state norms: exact orthogonal case, shrinking phase error", ok, d);

  ok = criterion_9(cli, scratch, d);
  report(9, "CLI determinism, artifact round-trips and exit codes", ok, d);

  if (failures == 0) {
    std::printf("all 9 criteria passed\n");
  } else {
    std::printf("%d criteria failed\n", failures);
  }
  return failures;
}
