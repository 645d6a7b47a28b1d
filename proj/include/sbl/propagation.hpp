#pragma once

#include <string>
#include <vector>

#include "sbl/linalg.hpp"
#include "sbl/model.hpp"

namespace sbl {

enum class EventKind { AvoidedCrossing, Degeneracy, Recombination, GaugeJump };

const char* event_kind_name(EventKind k);

struct Event {
  EventKind kind;
  double t = 0.0;
  int branch_a = -1;
  int branch_b = -1;  // -1 for single-branch events
  double gap = 0.0;
};

using EventLog = std::vector<Event>;

// Branch-resolved history of a Schmidt form. forms[k] is sorted by descending
// weight; branch_ids[k][s] maps storage slot s at time k to a stable branch
// label so identities survive weight crossings.
struct SchmidtTrajectory {
  std::vector<double> times;
  std::vector<SchmidtForm> forms;
  std::vector<std::vector<int>> branch_ids;
  EventLog events;  // gauge jumps recorded while the trajectory was assembled

  int branches() const { return forms.empty() ? 0 : forms.front().branches(); }
  // Weight of the branch with stable label `id` at time index k.
  double probability(int k, int id) const;
  CVec left_state(int k, int id) const;
  CVec right_state(int k, int id) const;
};

// Spectral propagation: psi_k = exp(-i H t_k / hbar) psi0. Times must be
// nondecreasing; the state is taken at t = 0.
std::vector<CVec> evolve_exact(const BipartiteModel& model, const CVec& psi0,
                               const std::vector<double>& times);

// Decompose each state and stitch branch identities across steps: optimal
// assignment on the |<phi_i(k)|phi_j(k+1)>| matrix, then the pairwise phase is
// aligned (overlap rotated real positive) when |overlap| > 0.1; otherwise a
// gauge_jump event is recorded and the fresh gauge kept.
SchmidtTrajectory schmidt_trajectory(const std::vector<CVec>& states,
                                     const std::vector<double>& times, int d_a, int d_b);

// Scan branch-tracked weights for near-crossings, exact crossings and branch
// extinctions. Minima are refined by local parabola / sign-change
// interpolation, so events between grid points are still seen.
EventLog detect_events(const SchmidtTrajectory& traj,
                       double gap_threshold = tol::gap_threshold_default);

// Uniform grid obeying max|eig(H)| * dt / hbar <= 0.05 unless `steps` forces a
// finer one.
std::vector<double> default_time_grid(const BipartiteModel& model, double t0, double t1,
                                      int steps = 0);

}  // namespace sbl
