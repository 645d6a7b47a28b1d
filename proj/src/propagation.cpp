#include "sbl/propagation.hpp"

#include <algorithm>
#include <cmath>

namespace sbl {

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::AvoidedCrossing: return "avoided_crossing";
    case EventKind::Degeneracy: return "degeneracy";
    case EventKind::Recombination: return "recombination";
    case EventKind::GaugeJump: return "gauge_jump";
  }
  return "unknown";
}

namespace {

int slot_of(const SchmidtTrajectory& traj, int k, int id) {
  const auto& ids = traj.branch_ids[k];
  for (int s = 0; s < static_cast<int>(ids.size()); ++s)
    if (ids[s] == id) return s;
  throw DimensionError("trajectory: unknown branch id");
}

}  // namespace

double SchmidtTrajectory::probability(int k, int id) const {
  int s = slot_of(*this, k, id);
  return forms[k].coeffs[s] * forms[k].coeffs[s];
}

CVec SchmidtTrajectory::left_state(int k, int id) const {
  return forms[k].left.col(slot_of(*this, k, id));
}

CVec SchmidtTrajectory::right_state(int k, int id) const {
  return forms[k].right.col(slot_of(*this, k, id));
}

std::vector<CVec> evolve_exact(const BipartiteModel& model, const CVec& psi0,
                               const std::vector<double>& times) {
  if (psi0.size() != model.dim()) throw DimensionError("evolve_exact: state dim mismatch");
  if (std::abs(psi0.norm() - 1.0) > tol::norm_tol)
    throw std::invalid_argument("evolve_exact: state not normalized");
  for (size_t k = 1; k < times.size(); ++k)
    if (times[k] < times[k - 1]) throw std::invalid_argument("evolve_exact: times must increase");

  EigResult eig = hermitian_eigendecomposition(model.h);
  CVec amp0 = eig.vectors.adjoint() * psi0;
  std::vector<CVec> out;
  out.reserve(times.size());
  for (double t : times) {
    CVec amp(amp0.size());
    for (int i = 0; i < amp0.size(); ++i) {
      double a = -eig.values[i] * t / model.hbar;
      amp[i] = amp0[i] * Cx(std::cos(a), std::sin(a));
    }
    out.push_back(eig.vectors * amp);
  }
  return out;
}

SchmidtTrajectory schmidt_trajectory(const std::vector<CVec>& states,
                                     const std::vector<double>& times, int d_a, int d_b) {
  if (states.size() != times.size())
    throw DimensionError("schmidt_trajectory: states/times length mismatch");
  if (states.empty()) throw std::invalid_argument("schmidt_trajectory: empty input");

  SchmidtTrajectory traj;
  traj.times = times;
  traj.forms.reserve(states.size());
  for (const CVec& psi : states) traj.forms.push_back(schmidt_decompose(psi, d_a, d_b));

  const int r = traj.forms.front().branches();
  traj.branch_ids.resize(states.size());
  traj.branch_ids[0].resize(r);
  for (int s = 0; s < r; ++s) traj.branch_ids[0][s] = s;

  for (size_t k = 1; k < states.size(); ++k) {
    const SchmidtForm& prev = traj.forms[k - 1];
    SchmidtForm& now = traj.forms[k];
    RMat score(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) score(i, j) = std::abs(prev.left.col(i).dot(now.left.col(j)));
    std::vector<int> match = max_weight_assignment(score);  // prev slot i -> now slot match[i]

    traj.branch_ids[k].assign(r, -1);
    for (int i = 0; i < r; ++i) {
      int j = match[i];
      traj.branch_ids[k][j] = traj.branch_ids[k - 1][i];
      Cx ov = prev.left.col(i).dot(now.left.col(j));
      if (std::abs(ov) > 0.1) {
        Cx c = std::conj(ov) / std::abs(ov);
        now.left.col(j) *= c;
        now.right.col(j) *= std::conj(c);
      } else {
        double p_prev = prev.coeffs[i] * prev.coeffs[i];
        double p_now = now.coeffs[j] * now.coeffs[j];
        if (p_prev > tol::eps_rank && p_now > tol::eps_rank) {
          traj.events.push_back(
              {EventKind::GaugeJump, times[k], traj.branch_ids[k][j], -1, std::abs(ov)});
        }
      }
    }
  }
  return traj;
}

namespace {

// Vertex of the parabola through three samples; returns (t*, value).
std::pair<double, double> parabola_vertex(double t0, double y0, double t1, double y1, double t2,
                                          double y2) {
  // Lagrange second differences on a possibly non-uniform grid.
  double d01 = (y1 - y0) / (t1 - t0);
  double d12 = (y2 - y1) / (t2 - t1);
  double c2 = (d12 - d01) / (t2 - t0);
  if (c2 <= 0.0) return {t1, y1};  // not convex, keep the sample
  double c1 = d01 - c2 * (t0 + t1);
  double ts = -c1 / (2.0 * c2);
  if (ts < t0 || ts > t2) return {t1, y1};
  double c0 = y0 - c2 * t0 * t0 - c1 * t0;
  return {ts, c0 + c1 * ts + c2 * ts * ts};
}

}  // namespace

EventLog detect_events(const SchmidtTrajectory& traj, double gap_threshold) {
  EventLog log;
  const int r = traj.branches();
  const int n = static_cast<int>(traj.times.size());
  if (n < 2) return log;

  std::vector<std::vector<double>> p(r, std::vector<double>(n));
  for (int id = 0; id < r; ++id)
    for (int k = 0; k < n; ++k) p[id][k] = traj.probability(k, id);

  for (int a = 0; a < r; ++a) {
    for (int b = a + 1; b < r; ++b) {
      std::vector<double> delta(n);
      for (int k = 0; k < n; ++k) delta[k] = p[a][k] - p[b][k];

      for (int k = 0; k + 1 < n; ++k) {
        if (delta[k] == 0.0 && k == 0) {
          log.push_back({EventKind::Degeneracy, traj.times[k], a, b, 0.0});
          continue;
        }
        if (delta[k] * delta[k + 1] < 0.0) {
          // Exact crossing between samples: the tracked gap changes sign.
          double f = delta[k] / (delta[k] - delta[k + 1]);
          double ts = traj.times[k] + f * (traj.times[k + 1] - traj.times[k]);
          log.push_back({EventKind::Degeneracy, ts, a, b, 0.0});
        } else if (delta[k + 1] == 0.0 && delta[k] != 0.0) {
          log.push_back({EventKind::Degeneracy, traj.times[k + 1], a, b, 0.0});
        }
      }

      // Interior minima of the gap without a sign change: fit the square,
      // which is exactly quadratic for the canonical avoided-crossing shape.
      for (int k = 1; k + 1 < n; ++k) {
        double g0 = std::abs(delta[k - 1]), g1 = std::abs(delta[k]), g2 = std::abs(delta[k + 1]);
        if (!(g1 < g0 && g1 <= g2)) continue;
        if (delta[k - 1] * delta[k] < 0.0 || delta[k] * delta[k + 1] < 0.0) continue;
        auto [ts, sq] = parabola_vertex(traj.times[k - 1], g0 * g0, traj.times[k], g1 * g1,
                                        traj.times[k + 1], g2 * g2);
        double gap = std::sqrt(std::max(sq, 0.0));
        if (gap >= gap_threshold) continue;
        EventKind kind = (gap < tol::eps_deg) ? EventKind::Degeneracy : EventKind::AvoidedCrossing;
        log.push_back({kind, ts, a, b, gap});
      }
    }
  }

  // Branch extinction: weight returns to zero after having been occupied.
  for (int a = 0; a < r; ++a) {
    double seen = 0.0;
    for (int k = 0; k < n; ++k) {
      bool candidate = false;
      double ts = traj.times[k];
      double val = p[a][k];
      double floor = tol::eps_rank;
      if (k > 0 && k + 1 < n && p[a][k] < p[a][k - 1] && p[a][k] <= p[a][k + 1]) {
        auto [tv, pv] =
            parabola_vertex(traj.times[k - 1], p[a][k - 1], ts, p[a][k], traj.times[k + 1],
                            p[a][k + 1]);
        ts = tv;
        val = std::max(pv, 0.0);
        candidate = true;
        // The quadratic fit resolves the minimum only down to its own bias,
        // which is of order curvature times spacing^4 for a smooth weight
        // curve. A vertex within that allowance counts as reaching zero.
        const double h1 = traj.times[k] - traj.times[k - 1];
        const double h2 = traj.times[k + 1] - traj.times[k];
        const double curv = 2.0 *
                            std::abs(h1 * p[a][k + 1] + h2 * p[a][k - 1] -
                                     (h1 + h2) * p[a][k]) /
                            (h1 * h2 * (h1 + h2));
        const double h = std::max(h1, h2);
        floor = std::max(floor, curv * h * h * h * h);
      } else if (k + 1 == n && p[a][k] < p[a][k - 1]) {
        candidate = true;
      }
      if (candidate && seen > 0.01 && val < floor) {
        log.push_back({EventKind::Recombination, ts, a, -1, val});
        seen = 0.0;
      }
      seen = std::max(seen, p[a][k]);
    }
  }

  std::stable_sort(log.begin(), log.end(), [](const Event& x, const Event& y) { return x.t < y.t; });

  // Collapse duplicates from adjacent refinements of the same feature.
  double window = 2.0 * (traj.times.back() - traj.times.front()) / std::max(1, n - 1);
  EventLog out;
  for (const Event& e : log) {
    bool dup = false;
    for (auto it = out.rbegin(); it != out.rend() && e.t - it->t <= window; ++it)
      if (it->kind == e.kind && it->branch_a == e.branch_a && it->branch_b == e.branch_b) {
        dup = true;
        break;
      }
    if (!dup) out.push_back(e);
  }
  return out;
}

std::vector<double> default_time_grid(const BipartiteModel& model, double t0, double t1,
                                      int steps) {
  if (t1 < t0) throw std::invalid_argument("time grid: t1 < t0");
  if (steps <= 0) {
    EigResult eig = hermitian_eigendecomposition(model.h);
    double emax = eig.values.cwiseAbs().maxCoeff();
    double dt = (emax > 0.0) ? 0.05 * model.hbar / emax : (t1 - t0);
    steps = (dt > 0.0) ? static_cast<int>(std::ceil((t1 - t0) / dt)) : 1;
    steps = std::max(steps, 1);
  }
  std::vector<double> times(steps + 1);
  for (int k = 0; k <= steps; ++k) times[k] = t0 + (t1 - t0) * k / steps;
  return times;
}

}  // namespace sbl
