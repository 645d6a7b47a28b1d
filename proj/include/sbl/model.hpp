#pragma once

#include <cstdint>
#include <vector>

#include "sbl/linalg.hpp"
#include "sbl/rng.hpp"
#include "sbl/types.hpp"

namespace sbl {

// A bipartite system with a fixed total Hamiltonian. dim_a is the observed
// subsystem, dim_b the environment side.
struct BipartiteModel {
  int dim_a = 0;
  int dim_b = 0;
  double hbar = 1.0;
  CMat h;  // (dim_a*dim_b) square, Hermitian

  int dim() const { return dim_a * dim_b; }
};

// Orthonormal pointer states with one conditional environment Hamiltonian per
// state. The induced total Hamiltonian sum_i |phi_i><phi_i| (x) H_i commutes
// with every pointer projector, so pointer records are never overwritten.
struct PointerBasis {
  CMat states;                   // dim_a x dim_a, orthonormal columns
  std::vector<CMat> conditional; // dim_a matrices, each dim_b x dim_b Hermitian
};

BipartiteModel make_model(int dim_a, int dim_b, CMat h, double hbar = 1.0);

BipartiteModel build_separable(const CMat& h_a, const CMat& h_b, double hbar = 1.0);

BipartiteModel build_measurement(const PointerBasis& pointer, double hbar = 1.0);

// h_a (x) 1 + 1 (x) h_b + g * h_int with all three drawn from the Gaussian
// Hermitian ensemble of rng.hpp, in that order, from one seeded stream.
BipartiteModel build_random(int dim_a, int dim_b, double interaction, std::uint64_t seed,
                            double hbar = 1.0);

PointerBasis computational_pointer(std::vector<CMat> conditional);

// Largest |<phi_i Phi_j| H |phi_i' Phi_j'>| over i != i': how strongly the
// Hamiltonian mixes records written in the given subsystem basis. The probe
// defaults to the computational basis of the environment.
double stability_violation(const BipartiteModel& model, const CMat& phi_set, const CMat& probe);
double stability_violation(const BipartiteModel& model, const CMat& phi_set);

CVec initial_factorized(const CVec& a, const CVec& b);
CVec initial_pointer_superposition(const PointerBasis& pointer, int i, int j, const CVec& env);
CVec initial_random(int dim_a, int dim_b, std::uint64_t seed);

}  // namespace sbl
