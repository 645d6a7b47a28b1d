#pragma once

#include <vector>

#include "sbl/types.hpp"

namespace sbl {

// Schmidt form of a bipartite pure state: psi = sum_i c_i * left_i (x) right_i
// with c_i real nonnegative sorted descending, and the left/right columns
// orthonormal. All min(dA,dB) triples are kept, including (near-)zero weights;
// `rank` counts the weights above tol::eps_rank.
//
// Gauge: the largest-magnitude amplitude of each left vector is rotated real
// positive, with the compensating phase applied to the right vector. Weight
// ties closer than tol::eps_deg are ordered by lexicographic comparison of the
// gauge-fixed left amplitude vectors and flagged in `degenerate`.
struct SchmidtForm {
  RVec coeffs;  // size r = min(dA, dB)
  CMat left;    // dA x r, columns are the subsystem states
  CMat right;   // dB x r
  int rank = 0;
  bool degenerate = false;

  int branches() const { return static_cast<int>(coeffs.size()); }
  int dim_left() const { return static_cast<int>(left.rows()); }
  int dim_right() const { return static_cast<int>(right.rows()); }

  CVec reconstruct() const;
  RVec probabilities() const;  // elementwise squares of coeffs
};

// Kronecker product of two states, flat index iA * dB + iB.
CVec tensor_product(const CVec& a, const CVec& b);

// Kronecker product of two operators under the same index convention.
CMat tensor_op(const CMat& a, const CMat& b);

// View a product-space state as the dA x dB amplitude matrix M(iA, iB).
CMat state_matrix(const CVec& psi, int d_a, int d_b);
CVec matrix_state(const CMat& m);

SchmidtForm schmidt_decompose(const CVec& psi, int d_a, int d_b);

// Reduced density matrix of one side. side: 0 = left (dA x dA), 1 = right.
CMat partial_trace(const CVec& psi, int d_a, int d_b, int side);

struct EigResult {
  RVec values;   // ascending
  CMat vectors;  // columns aligned with values
};

EigResult hermitian_eigendecomposition(const CMat& h);

// exp(-i H t / hbar) through the spectral decomposition.
CMat unitary_propagator(const CMat& h, double t, double hbar = 1.0);

// Extends k orthonormal columns to a full orthonormal basis of the space.
CMat orthonormal_completion(const CMat& cols, int dim);

CVec basis_vector(int dim, int index);

// Max-weight perfect assignment on a small square score matrix (bitmask DP);
// returns the column assigned to each row.
std::vector<int> max_weight_assignment(const RMat& score);

}  // namespace sbl
