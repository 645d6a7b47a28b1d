#include "sbl/model.hpp"

#include <cmath>

namespace sbl {

BipartiteModel make_model(int dim_a, int dim_b, CMat h, double hbar) {
  if (dim_a < 2 || dim_b < 2) throw DimensionError("model: dims must be >= 2");
  if (hbar <= 0.0) throw std::invalid_argument("model: hbar must be positive");
  if (h.rows() != dim_a * dim_b || h.cols() != dim_a * dim_b)
    throw DimensionError("model: Hamiltonian shape != dA*dB");
  if (!is_hermitian(h)) throw std::invalid_argument("model: Hamiltonian not Hermitian");
  return {dim_a, dim_b, hbar, std::move(h)};
}

BipartiteModel build_separable(const CMat& h_a, const CMat& h_b, double hbar) {
  const int da = static_cast<int>(h_a.rows());
  const int db = static_cast<int>(h_b.rows());
  CMat h = tensor_op(h_a, CMat::Identity(db, db)) + tensor_op(CMat::Identity(da, da), h_b);
  return make_model(da, db, std::move(h), hbar);
}

BipartiteModel build_measurement(const PointerBasis& pointer, double hbar) {
  const int da = static_cast<int>(pointer.states.rows());
  if (pointer.states.cols() != da)
    throw DimensionError("measurement: pointer basis must be complete");
  if (!is_unitary(pointer.states))
    throw std::invalid_argument("measurement: pointer states not orthonormal");
  if (static_cast<int>(pointer.conditional.size()) != da)
    throw DimensionError("measurement: need one conditional Hamiltonian per pointer state");
  const int db = static_cast<int>(pointer.conditional.front().rows());
  CMat h = CMat::Zero(da * db, da * db);
  for (int i = 0; i < da; ++i) {
    const CMat& hi = pointer.conditional[i];
    if (hi.rows() != db || hi.cols() != db)
      throw DimensionError("measurement: conditional Hamiltonian shape mismatch");
    if (!is_hermitian(hi))
      throw std::invalid_argument("measurement: conditional Hamiltonian not Hermitian");
    CVec phi = pointer.states.col(i);
    h += tensor_op(phi * phi.adjoint(), hi);
  }
  return make_model(da, db, std::move(h), hbar);
}

BipartiteModel build_random(int dim_a, int dim_b, double interaction, std::uint64_t seed,
                            double hbar) {
  Rng rng(seed);
  CMat h_a = random_hermitian(dim_a, rng);
  CMat h_b = random_hermitian(dim_b, rng);
  CMat h_int = random_hermitian(dim_a * dim_b, rng);
  CMat h = tensor_op(h_a, CMat::Identity(dim_b, dim_b)) +
           tensor_op(CMat::Identity(dim_a, dim_a), h_b) + interaction * h_int;
  return make_model(dim_a, dim_b, std::move(h), hbar);
}

PointerBasis computational_pointer(std::vector<CMat> conditional) {
  const int da = static_cast<int>(conditional.size());
  PointerBasis pb;
  pb.states = CMat::Identity(da, da);
  pb.conditional = std::move(conditional);
  return pb;
}

double stability_violation(const BipartiteModel& model, const CMat& phi_set, const CMat& probe) {
  if (phi_set.rows() != model.dim_a) throw DimensionError("stability_violation: phi dim mismatch");
  if (probe.rows() != model.dim_b) throw DimensionError("stability_violation: probe dim mismatch");
  const int k = static_cast<int>(phi_set.cols());
  const int m = static_cast<int>(probe.cols());
  CMat frame = tensor_op(phi_set, probe);
  CMat t = frame.adjoint() * model.h * frame;  // (k*m) square, indexed (i*m + j)
  double worst = 0.0;
  for (int i = 0; i < k; ++i)
    for (int ip = 0; ip < k; ++ip) {
      if (i == ip) continue;
      for (int j = 0; j < m; ++j)
        for (int jp = 0; jp < m; ++jp)
          worst = std::max(worst, std::abs(t(i * m + j, ip * m + jp)));
    }
  return worst;
}

double stability_violation(const BipartiteModel& model, const CMat& phi_set) {
  return stability_violation(model, phi_set, CMat::Identity(model.dim_b, model.dim_b));
}

CVec initial_factorized(const CVec& a, const CVec& b) {
  if (std::abs(a.norm() - 1.0) > tol::norm_tol || std::abs(b.norm() - 1.0) > tol::norm_tol)
    throw std::invalid_argument("initial_factorized: factors must be normalized");
  return tensor_product(a, b);
}

CVec initial_pointer_superposition(const PointerBasis& pointer, int i, int j, const CVec& env) {
  const int da = static_cast<int>(pointer.states.rows());
  if (i < 0 || j < 0 || i >= da || j >= da)
    throw DimensionError("pointer_superposition: index out of range");
  if (i == j) throw std::invalid_argument("pointer_superposition: indices must differ");
  if (std::abs(env.norm() - 1.0) > tol::norm_tol)
    throw std::invalid_argument("pointer_superposition: environment state not normalized");
  CVec phi = (pointer.states.col(i) + pointer.states.col(j)) / std::sqrt(2.0);
  return tensor_product(phi, env);
}

CVec initial_random(int dim_a, int dim_b, std::uint64_t seed) {
  Rng rng(seed);
  return random_state(dim_a * dim_b, rng);
}

}  // namespace sbl
