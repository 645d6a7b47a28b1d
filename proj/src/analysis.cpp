#include "sbl/analysis.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sbl/linalg.hpp"
#include "sbl/rng.hpp"

namespace sbl {

namespace {

void check_unitary_basis(const CMat& basis, int dim, const char* name) {
  if (basis.rows() != dim || basis.cols() != dim) {
    throw DimensionError(std::string(name) + ": basis must be square of subsystem dimension");
  }
  if (!is_unitary(basis)) {
    throw std::invalid_argument(std::string(name) + ": basis columns are not orthonormal");
  }
}

}  // namespace

CMat relative_decomposition(const CVec& psi, const CMat& basis, int d_a, int d_b) {
  const CMat m = state_matrix(psi, d_a, d_b);
  check_unitary_basis(basis, d_a, "relative_decomposition");
  // Phi^(i)[b] = sum_a conj(basis(a,i)) psi[a*d_b + b]
  return m.transpose() * basis.conjugate();
}

double entanglement_entropy(const RVec& p) {
  double sum = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] < -1e-12) {
      throw std::invalid_argument("entanglement_entropy: negative probability");
    }
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > 1e-8) {
    throw std::invalid_argument("entanglement_entropy: probabilities do not sum to one");
  }
  double s = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s -= p[i] * std::log(p[i]);
  }
  return s;
}

double entanglement_rate(const BipartiteModel& model, const CMat& phi_basis,
                         const CMat& env_basis, int i) {
  check_unitary_basis(phi_basis, model.dim_a, "entanglement_rate");
  check_unitary_basis(env_basis, model.dim_b, "entanglement_rate");
  if (i < 0 || i >= model.dim_a || i >= model.dim_b) {
    throw std::invalid_argument("entanglement_rate: branch index out of range");
  }
  const CVec target = tensor_product(phi_basis.col(i), env_basis.col(i));
  const CVec w = model.h * target;
  double acc = 0.0;
  for (int j = 0; j < model.dim_a; ++j) {
    if (j == i) continue;
    for (int jp = 0; jp < model.dim_b; ++jp) {
      if (jp == i) continue;
      const Cx amp = tensor_product(phi_basis.col(j), env_basis.col(jp)).dot(w);
      acc += std::norm(amp);
    }
  }
  return acc;
}

double entanglement_rate_superposition(const CMat& h_i, const CMat& h_j, const CVec& phi_env) {
  const int d = static_cast<int>(phi_env.size());
  if (h_i.rows() != d || h_i.cols() != d || h_j.rows() != d || h_j.cols() != d) {
    throw DimensionError("entanglement_rate_superposition: operator/state size mismatch");
  }
  if (std::abs(phi_env.norm() - 1.0) > tol::norm_tol) {
    throw std::invalid_argument("entanglement_rate_superposition: state not normalized");
  }
  const CVec v = (h_i - h_j) * phi_env;
  const CVec perp = v - phi_env * phi_env.dot(v);
  return 0.5 * perp.squaredNorm();
}

double quadratic_growth_fit(const BipartiteModel& model, const CVec& psi0, double t_max,
                            int n_points) {
  if (t_max <= 0.0 || n_points < 2) {
    throw std::invalid_argument("quadratic_growth_fit: need t_max > 0 and n_points >= 2");
  }
  const SchmidtForm start = schmidt_decompose(psi0, model.dim_a, model.dim_b);
  if (start.rank != 1) {
    throw std::invalid_argument("quadratic_growth_fit: initial state must be a product state");
  }
  std::vector<double> times(n_points);
  for (int k = 0; k < n_points; ++k) times[k] = t_max * double(k + 1) / n_points;
  const std::vector<CVec> states = evolve_exact(model, psi0, times);
  double num = 0.0, den = 0.0;
  for (int k = 0; k < n_points; ++k) {
    const SchmidtForm f = schmidt_decompose(states[k], model.dim_a, model.dim_b);
    const double y = 1.0 - f.coeffs[0] * f.coeffs[0];
    const double t2 = times[k] * times[k];
    num += y * t2;
    den += t2 * t2;
  }
  return num / den;
}

SchmidtForm nested_schmidt(const CVec& phi_env, int d1, int d2) {
  CVec normalized = phi_env;
  const double n = normalized.norm();
  if (n <= tol::eps_rank) {
    throw std::invalid_argument("nested_schmidt: zero state");
  }
  normalized /= n;
  return schmidt_decompose(normalized, d1, d2);
}

namespace {

void check_memory(const MemoryExpansion& mem) {
  if (mem.blocks < 1 || mem.block_size < 1) {
    throw std::invalid_argument("memory expansion: blocks and block_size must be positive");
  }
  if (mem.c.empty()) {
    throw std::invalid_argument("memory expansion: no coefficient matrices");
  }
  for (const CMat& cm : mem.c) {
    if (cm.rows() != mem.blocks || cm.cols() != mem.block_size) {
      throw DimensionError("memory expansion: coefficient matrix shape mismatch");
    }
  }
}

}  // namespace

CMat memory_projector(const MemoryExpansion& mem, int n) {
  check_memory(mem);
  if (n < 0 || n >= mem.blocks) {
    throw std::invalid_argument("memory_projector: record index out of range");
  }
  CMat p = CMat::Zero(mem.dim(), mem.dim());
  for (int m = 0; m < mem.block_size; ++m) {
    const int idx = n * mem.block_size + m;
    p(idx, idx) = 1.0;
  }
  return p;
}

CVec memory_state(const MemoryExpansion& mem, int alpha) {
  check_memory(mem);
  if (alpha < 0 || alpha >= mem.alphas()) {
    throw std::invalid_argument("memory_state: alpha out of range");
  }
  CVec chi = CVec::Zero(mem.dim());
  for (int n = 0; n < mem.blocks; ++n) {
    for (int m = 0; m < mem.block_size; ++m) {
      chi[n * mem.block_size + m] = mem.c[alpha](n, m);
    }
  }
  return chi;
}

CMat memory_rho(const MemoryExpansion& mem, const RVec& q) {
  check_memory(mem);
  if (q.size() != mem.alphas()) {
    throw DimensionError("memory_rho: weight count mismatch");
  }
  CMat rho = CMat::Zero(mem.dim(), mem.dim());
  for (int a = 0; a < mem.alphas(); ++a) {
    const CVec chi = memory_state(mem, a);
    rho += q[a] * (chi * chi.adjoint());
  }
  return rho;
}

BranchingRatios branching_ratios(const MemoryExpansion& mem, const RVec& q) {
  check_memory(mem);
  if (q.size() != mem.alphas()) {
    throw DimensionError("branching_ratios: weight count mismatch");
  }
  BranchingRatios out;
  out.weight_direct = RVec::Zero(mem.blocks);
  out.weight_projected = RVec::Zero(mem.blocks);
  for (int n = 0; n < mem.blocks; ++n) {
    double direct = 0.0;
    for (int a = 0; a < mem.alphas(); ++a) {
      direct += q[a] * mem.c[a].row(n).squaredNorm();
    }
    out.weight_direct[n] = direct;
  }
  const CMat rho = memory_rho(mem, q);
  for (int n = 0; n < mem.blocks; ++n) {
    out.weight_projected[n] = (memory_projector(mem, n) * rho).trace().real();
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.ratio_direct = RMat::Constant(mem.blocks, mem.blocks, nan);
  out.ratio_projected = RMat::Constant(mem.blocks, mem.blocks, nan);
  for (int n = 0; n < mem.blocks; ++n) {
    for (int np = 0; np < mem.blocks; ++np) {
      if (out.weight_direct[np] > 0.0) {
        out.ratio_direct(n, np) = out.weight_direct[n] / out.weight_direct[np];
      }
      if (out.weight_projected[np] > 0.0) {
        out.ratio_projected(n, np) = out.weight_projected[n] / out.weight_projected[np];
      }
    }
  }
  return out;
}

namespace {

void check_observe_ops(const ObserveOps& ops) {
  if (ops.dim_observer < 1 || ops.dim_memory < 1 || ops.dim_far < 1) {
    throw std::invalid_argument("observe: dimensions must be positive");
  }
  const std::size_t records = ops.projectors.size();
  if (records == 0 || ops.shifts.size() != records) {
    throw std::invalid_argument("observe: need one shift per projector");
  }
  if (!ops.kicks.empty() && ops.kicks.size() != records) {
    throw std::invalid_argument("observe: kick count mismatch");
  }
  CMat sum = CMat::Zero(ops.dim_memory, ops.dim_memory);
  for (const CMat& p : ops.projectors) {
    if (p.rows() != ops.dim_memory || p.cols() != ops.dim_memory) {
      throw DimensionError("observe: projector shape mismatch");
    }
    if (!is_hermitian(p) || (p * p - p).cwiseAbs().maxCoeff() > 1e-10) {
      throw std::invalid_argument("observe: projectors must be Hermitian idempotents");
    }
    sum += p;
  }
  if ((sum - CMat::Identity(ops.dim_memory, ops.dim_memory)).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::invalid_argument("observe: projectors must resolve the identity");
  }
  for (std::size_t n = 0; n < records; ++n) {
    if (ops.shifts[n].rows() != ops.dim_observer || ops.shifts[n].cols() != ops.dim_observer ||
        !is_unitary(ops.shifts[n])) {
      throw std::invalid_argument("observe: shifts must be observer-space unitaries");
    }
    for (std::size_t m = 0; m < records; ++m) {
      if (m == n) continue;
      if ((ops.projectors[n] * ops.projectors[m]).cwiseAbs().maxCoeff() > 1e-10) {
        throw std::invalid_argument("observe: projectors must be mutually orthogonal");
      }
    }
    if (!ops.kicks.empty()) {
      if (ops.kicks[n].rows() != ops.dim_far || ops.kicks[n].cols() != ops.dim_far ||
          !is_unitary(ops.kicks[n])) {
        throw std::invalid_argument("observe: kicks must be far-space unitaries");
      }
    }
  }
}

}  // namespace

CVec observe(const CVec& psi_pre, const ObserveOps& ops) {
  check_observe_ops(ops);
  const long total = long(ops.dim_observer) * ops.dim_memory * ops.dim_far;
  if (psi_pre.size() != total) {
    throw DimensionError("observe: state size does not match dim_observer*dim_memory*dim_far");
  }
  CVec out = CVec::Zero(total);
  const long env = long(ops.dim_memory) * ops.dim_far;
  for (std::size_t n = 0; n < ops.projectors.size(); ++n) {
    // Reshape to (observer) x (memory*far), apply the shift across observer
    // slots, then per observer slot apply projector and kick on the split.
    CMat block(ops.dim_observer, env);
    for (int o = 0; o < ops.dim_observer; ++o) {
      block.row(o) = psi_pre.segment(long(o) * env, env).transpose();
    }
    const CMat shifted = ops.shifts[n] * block;
    for (int o = 0; o < ops.dim_observer; ++o) {
      CMat slice(ops.dim_memory, ops.dim_far);
      for (int e1 = 0; e1 < ops.dim_memory; ++e1) {
        slice.row(e1) = shifted.row(o).segment(long(e1) * ops.dim_far, ops.dim_far);
      }
      CMat acted = ops.projectors[n] * slice;
      if (!ops.kicks.empty()) acted = acted * ops.kicks[n].transpose();
      for (int e1 = 0; e1 < ops.dim_memory; ++e1) {
        out.segment(long(o) * env + long(e1) * ops.dim_far, ops.dim_far) +=
            acted.row(e1).transpose();
      }
    }
  }
  return out;
}

RelativeNorms relative_norms(const RelativeNormInput& in) {
  const int alphas = static_cast<int>(in.q.size());
  if (alphas == 0 || static_cast<int>(in.c.size()) != alphas) {
    throw std::invalid_argument("relative_norms: weight/coefficient count mismatch");
  }
  const int blocks = static_cast<int>(in.c[0].rows());
  if (static_cast<int>(in.overlap.size()) != blocks) {
    throw std::invalid_argument("relative_norms: need one Gram matrix per record");
  }
  for (const CMat& g : in.overlap) {
    if (g.rows() != alphas || g.cols() != alphas) {
      throw DimensionError("relative_norms: Gram matrix shape mismatch");
    }
  }
  RelativeNorms out;
  out.exact = RVec::Zero(blocks);
  out.approx = RVec::Zero(blocks);
  for (int n = 0; n < blocks; ++n) {
    Cx exact = 0.0;
    double approx = 0.0;
    for (int a = 0; a < alphas; ++a) {
      approx += in.q[a] * in.c[a].row(n).squaredNorm();
      for (int ap = 0; ap < alphas; ++ap) {
        const Cx mem_ov = in.c[ap].row(n).dot(in.c[a].row(n));
        exact += std::sqrt(in.q[a] * in.q[ap]) * mem_ov * in.overlap[n](ap, a);
      }
    }
    out.exact[n] = in.p * exact.real();
    out.approx[n] = in.p * approx;
  }
  return out;
}

CMat random_phase_gram(int alphas, Rng& rng) {
  if (alphas < 1) throw std::invalid_argument("random_phase_gram: need at least one label");
  // Gram matrix of `alphas` unit vectors whose components are pure phases,
  // one phase vector per label. Diagonal entries are exactly one; the
  // off-diagonal overlaps carry uniformly random phases and concentrate
  // toward zero as the label count grows, which is what makes dropping the
  // cross terms a better approximation for larger expansions.
  CMat v(alphas, alphas);
  const double scale = 1.0 / std::sqrt(double(alphas));
  for (int k = 0; k < alphas; ++k) {
    for (int a = 0; a < alphas; ++a) v(k, a) = scale * rng.phase();
  }
  CMat g = v.adjoint() * v;
  g.diagonal().setOnes();  // exact, not up to roundoff
  return g;
}

CVec ObservationScenario::expected_relative(int i, int n) const {
  const int d1 = blocks * block_size;
  CVec out = CVec::Zero(long(d1) * dim_far);
  CMat kick = CMat::Identity(dim_far, dim_far);
  if (!ops.kicks.empty()) kick = ops.kicks[n];
  for (int a = 0; a < alphas; ++a) {
    const CVec far = kick * far_states[i].col(a);
    for (int m = 0; m < block_size; ++m) {
      const Cx coef = std::sqrt(p[i] * q(i, a)) * c[i][a](n, m);
      out.segment(long(n * block_size + m) * dim_far, dim_far) += coef * far;
    }
  }
  return out;
}

ObservationScenario build_observation_scenario(int branches, int alphas, int blocks,
                                               int block_size, int dim_far, std::uint64_t seed) {
  if (branches < 1 || alphas < 1 || blocks < 1 || block_size < 1) {
    throw std::invalid_argument("build_observation_scenario: counts must be positive");
  }
  if (dim_far < alphas) {
    throw std::invalid_argument(
        "build_observation_scenario: far dimension must fit orthonormal labels");
  }
  ObservationScenario sc;
  sc.branches = branches;
  sc.alphas = alphas;
  sc.blocks = blocks;
  sc.block_size = block_size;
  sc.dim_far = dim_far;

  Rng rng(seed);
  sc.p = RVec(branches);
  double psum = 0.0;
  for (int i = 0; i < branches; ++i) {
    sc.p[i] = rng.uniform() + 0.1;
    psum += sc.p[i];
  }
  sc.p /= psum;

  sc.q = RMat(branches, alphas);
  for (int i = 0; i < branches; ++i) {
    double qsum = 0.0;
    for (int a = 0; a < alphas; ++a) {
      sc.q(i, a) = rng.uniform() + 0.1;
      qsum += sc.q(i, a);
    }
    sc.q.row(i) /= qsum;
  }

  sc.c.resize(branches);
  for (int i = 0; i < branches; ++i) {
    sc.c[i].resize(alphas);
    for (int a = 0; a < alphas; ++a) {
      CMat cm(blocks, block_size);
      for (int n = 0; n < blocks; ++n) {
        for (int m = 0; m < block_size; ++m) cm(n, m) = rng.cnormal();
      }
      sc.c[i][a] = cm / cm.norm();
    }
  }

  sc.far_states.resize(branches);
  for (int i = 0; i < branches; ++i) {
    sc.far_states[i] = random_unitary(dim_far, rng).leftCols(alphas);
  }

  const int d1 = blocks * block_size;
  const int d_obs = sc.dim_observer();
  sc.ops.dim_observer = d_obs;
  sc.ops.dim_memory = d1;
  sc.ops.dim_far = dim_far;
  MemoryExpansion proto;
  proto.blocks = blocks;
  proto.block_size = block_size;
  proto.c.push_back(CMat::Zero(blocks, block_size));
  for (int n = 0; n < blocks; ++n) {
    sc.ops.projectors.push_back(memory_projector(proto, n));
    // Swap each branch's ready slot with its outcome-n slot; other slots stay.
    CMat s = CMat::Identity(d_obs, d_obs);
    for (int i = 0; i < branches; ++i) {
      const int r = sc.ready_slot(i);
      const int o = sc.outcome_slot(i, n);
      s(r, r) = 0.0;
      s(o, o) = 0.0;
      s(r, o) = 1.0;
      s(o, r) = 1.0;
    }
    sc.ops.shifts.push_back(s);
    sc.ops.kicks.push_back(random_unitary(dim_far, rng));
  }

  sc.psi_pre = CVec::Zero(long(d_obs) * d1 * dim_far);
  for (int i = 0; i < branches; ++i) {
    CVec env = CVec::Zero(long(d1) * dim_far);
    for (int a = 0; a < alphas; ++a) {
      MemoryExpansion one;
      one.blocks = blocks;
      one.block_size = block_size;
      one.c.push_back(sc.c[i][a]);
      env += std::sqrt(sc.q(i, a)) *
             tensor_product(memory_state(one, 0), sc.far_states[i].col(a));
    }
    const long offset = long(sc.ready_slot(i)) * d1 * dim_far;
    sc.psi_pre.segment(offset, long(d1) * dim_far) += std::sqrt(sc.p[i]) * env;
  }
  return sc;
}

}  // namespace sbl
