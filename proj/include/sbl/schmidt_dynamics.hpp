#pragma once

#include "sbl/model.hpp"
#include "sbl/propagation.hpp"

namespace sbl {

// Derivative of a Schmidt form under the total Hamiltonian, column-aligned
// with the form. The flow is equivalent to the Schroedinger equation as long
// as occupied weights stay separated; the pair terms carry 1/(p_i - p_j)
// resonance factors.
struct SchmidtDerivative {
  RVec d_coeffs;
  CMat d_left;
  CMat d_right;
};

enum class ResonancePolicy { Halt, Reseed };

struct IntegratorOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double eps_gap = tol::eps_gap_default;  // occupied-pair separation guard
  double max_step = 0.1;
  double min_step = 1e-12;
  ResonancePolicy on_resonance = ResonancePolicy::Reseed;
};

// Coupled flow of weights and factor states:
//   hbar d c_i/dt            = Im <l_i r_i|H|psi>
//   i hbar d r_i/dt |_{r_j}  = (c_i <l_i r_j|H|psi> - c_j <psi|H|l_j r_i>) / (p_i - p_j)
//   i hbar d l_i/dt |_{l_j}  = (c_i <l_j r_i|H|psi> - c_j <psi|H|l_i r_j>) / (p_i - p_j)
//   i hbar d l_i/dt |_{l_i}  = Re <l_i r_i|H|psi> / c_i
// The diagonal phase convention puts the whole branch phase velocity on the
// left factor; the right factors carry none. Branches with p <= eps_rank are
// held frozen (zero derivative) and enter the occupied branches' sums with
// weight exactly zero. Occupied pairs closer than eps_gap throw
// DegenerateSpectrum unless their pair numerators vanish, which is the exact
// crossing case and contributes nothing.
//
// The flow is singular where a weight passes through zero, so branch
// extinction and rebirth are resolved only by the decomposition route.
SchmidtDerivative schmidt_rhs(const SchmidtForm& form, const BipartiteModel& model,
                              double eps_gap = tol::eps_gap_default);

// Embedded Dormand-Prince 5(4) with error weights atol + rtol*|y|. Lands on
// every requested time exactly. On a resonance throw the step is retried
// smaller; below min_step the policy decides: Halt records a degeneracy event
// and returns the truncated trajectory, Reseed re-derives the form from the
// reconstructed state and goes on, failing with NumericalFailure if that makes
// no progress. Emitted forms are renormalized and re-orthonormalized (occupied
// block symmetrically, empty branches re-completed), with weights sorted
// descending and stable labels in branch_ids.
SchmidtTrajectory integrate_schmidt(const BipartiteModel& model, const SchmidtForm& form0,
                                    const std::vector<double>& times,
                                    const IntegratorOptions& opts = {});

// i hbar d rho / dt for the chosen side (0 = left, 1 = right), expanded in the
// branch states of the form. Anti-Hermitian and traceless; for equal
// dimensions and full rank this equals the partial trace of [H, |psi><psi|].
// Energy resonances 1/(p_i - p_j) do not appear here.
CMat reduced_density_flow(const SchmidtForm& form, const BipartiteModel& model, int side);

// <Phi|H|Phi> contracted over the right factor: the dA x dA Hamiltonian felt
// by the left subsystem while the environment sits in Phi. Includes the
// environment energy as a scalar shift.
CMat effective_hamiltonian(const BipartiteModel& model, const CVec& phi_env);

// Reduced flow for branches locked to a pointer basis (record-keeping
// regime): weights stay put and the factor rotations depend only on the
// conditional Hamiltonians. Every branch left state must coincide with a
// pointer state up to phase (overlap >= 1 - 1e-8). Agrees with schmidt_rhs
// whenever the model is exactly of measurement type.
SchmidtDerivative stable_branch_rhs(const SchmidtForm& form, const PointerBasis& pointer,
                                    const BipartiteModel& model,
                                    double eps_gap = tol::eps_gap_default);

}  // namespace sbl
