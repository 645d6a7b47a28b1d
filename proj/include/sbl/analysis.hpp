#pragma once

#include <cstdint>
#include <vector>

#include "sbl/model.hpp"
#include "sbl/propagation.hpp"

namespace sbl {

// Columns Phi^(i) = <phi_i|psi> (unnormalized relative environment states) for
// a complete orthonormal subsystem basis; sum_i phi_i (x) Phi^(i)
// reconstructs psi and the squared norms sum to one.
CMat relative_decomposition(const CVec& psi, const CMat& basis, int d_a, int d_b);

// S = -sum p ln p (natural log).
double entanglement_entropy(const RVec& p);

// How fast the product state phi_i (x) Phi_i entangles: the summed squared
// Hamiltonian matrix elements into states orthogonal on both sides,
//   A = sum_{j != i, j' != i} |<phi_j Phi_j'| H |phi_i Phi_i>|^2 ,
// so 1 - p_max grows like A t^2 / hbar^2 from the product start.
double entanglement_rate(const BipartiteModel& model, const CMat& phi_basis,
                         const CMat& env_basis, int i);

// Closed form quoted for an equal superposition of two pointer branches with
// conditional Hamiltonians h_i, h_j and environment state phi:
//   || (1 - |phi><phi|) (h_i - h_j) phi ||^2 / 2 .
// Evaluated verbatim; it runs a constant factor above the growth-fit value
// (the reports record the ratio).
double entanglement_rate_superposition(const CMat& h_i, const CMat& h_j, const CVec& phi_env);

// Least-squares coefficient a in 1 - p_max(t) ~ a t^2, from exact short-time
// evolution of a product state. Sampling horizon should satisfy
// t_max * ||H|| << 1 for the quadratic regime.
double quadratic_growth_fit(const BipartiteModel& model, const CVec& psi0, double t_max,
                            int n_points);

// Second-level decomposition of one environment branch across a (d1, d2)
// split of the environment.
SchmidtForm nested_schmidt(const CVec& phi_env, int d1, int d2);

// Record structure on the memory subsystem: d1 = blocks * block_size, record
// n owns the n-th block of basis states, and each environment label alpha
// carries a (blocks x block_size) coefficient matrix on that grid.
struct MemoryExpansion {
  int blocks = 0;
  int block_size = 0;
  std::vector<CMat> c;  // one coefficient matrix per alpha, unit Frobenius norm

  int dim() const { return blocks * block_size; }
  int alphas() const { return static_cast<int>(c.size()); }
};

CMat memory_projector(const MemoryExpansion& mem, int n);
CVec memory_state(const MemoryExpansion& mem, int alpha);
CMat memory_rho(const MemoryExpansion& mem, const RVec& q);

struct BranchingRatios {
  RVec weight_direct;     // sum_{alpha,m} q_alpha |c_nm|^2
  RVec weight_projected;  // tr[P_n rho]
  RMat ratio_direct;      // (n, n') tables; NaN marks an undefined ratio
  RMat ratio_projected;
};

// Both routes to the relative frequency of record n against n': directly from
// the expansion coefficients and through projector traces against the mixed
// memory state. The two tables agree identically.
BranchingRatios branching_ratios(const MemoryExpansion& mem, const RVec& q);

// Ideal recording step on observer (x) memory (x) far environment:
//   U = sum_n shift_n (x) P_n (x) kick_n ,
// reading the record without rewriting it. Empty kicks mean identities.
struct ObserveOps {
  int dim_observer = 0;
  int dim_memory = 0;
  int dim_far = 0;
  std::vector<CMat> shifts;
  std::vector<CMat> projectors;
  std::vector<CMat> kicks;
};

CVec observe(const CVec& psi_pre, const ObserveOps& ops);

// Norm of the relative state attached to outcome (i, n): exact double sum
// over environment labels against the Gram matrix of the far-environment
// states, and the diagonal approximation that drops cross terms. overlap[n]
// is the alphas x alphas Gram matrix of the kicked far states for record n.
struct RelativeNormInput {
  double p = 1.0;  // branch weight
  RVec q;
  std::vector<CMat> c;        // per alpha, blocks x block_size
  std::vector<CMat> overlap;  // per record n
};

struct RelativeNorms {
  RVec exact;
  RVec approx;
};

RelativeNorms relative_norms(const RelativeNormInput& in);

// Unit-magnitude random-phase Gram matrix (rank one, PSD): the overlap
// pattern of far states that are identical up to seeded phases.
CMat random_phase_gram(int alphas, Rng& rng);

// Fully assembled three-layer scenario for the recording step: branch weights
// p_i, per-branch environment weights q_{i,alpha}, memory coefficients, far
// states orthonormal in alpha, plus the recording unitaries. Observer slots:
// per branch one "ready" state and one state per record.
struct ObservationScenario {
  int branches = 0;
  int alphas = 0;
  int blocks = 0;
  int block_size = 0;
  int dim_far = 0;

  RVec p;
  RMat q;                            // branches x alphas
  std::vector<std::vector<CMat>> c;  // [branch][alpha] -> blocks x block_size
  std::vector<CMat> far_states;      // [branch] -> dim_far x alphas, orthonormal columns
  ObserveOps ops;
  CVec psi_pre;

  int dim_observer() const { return branches * (blocks + 1); }
  int ready_slot(int i) const { return i * (blocks + 1); }
  int outcome_slot(int i, int n) const { return i * (blocks + 1) + 1 + n; }

  // Relative state of outcome (i, n) on memory (x) far space, assembled from
  // the expansion directly rather than from the acted-on state.
  CVec expected_relative(int i, int n) const;
};

ObservationScenario build_observation_scenario(int branches, int alphas, int blocks,
                                               int block_size, int dim_far, std::uint64_t seed);

}  // namespace sbl
