#include "sbl/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace sbl {

CVec SchmidtForm::reconstruct() const {
  const int da = dim_left();
  const int db = dim_right();
  CVec psi = CVec::Zero(da * db);
  for (int i = 0; i < branches(); ++i) {
    if (coeffs[i] == 0.0) continue;
    psi += coeffs[i] * tensor_product(left.col(i), right.col(i));
  }
  return psi;
}

RVec SchmidtForm::probabilities() const { return coeffs.array().square(); }

CVec tensor_product(const CVec& a, const CVec& b) {
  const int da = static_cast<int>(a.size());
  const int db = static_cast<int>(b.size());
  if (da == 0 || db == 0) throw DimensionError("tensor_product: empty factor");
  CVec out(da * db);
  for (int i = 0; i < da; ++i) out.segment(i * db, db) = a[i] * b;
  return out;
}

CMat tensor_op(const CMat& a, const CMat& b) {
  CMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CMat state_matrix(const CVec& psi, int d_a, int d_b) {
  if (d_a < 1 || d_b < 1 || psi.size() != static_cast<long>(d_a) * d_b)
    throw DimensionError("state_matrix: size != dA*dB");
  CMat m(d_a, d_b);
  for (int i = 0; i < d_a; ++i) m.row(i) = psi.segment(i * d_b, d_b).transpose();
  return m;
}

CVec matrix_state(const CMat& m) {
  CVec psi(m.rows() * m.cols());
  for (int i = 0; i < m.rows(); ++i) psi.segment(i * m.cols(), m.cols()) = m.row(i).transpose();
  return psi;
}

namespace {

// Lexicographic order on complex amplitude vectors, (re, im) pairs entrywise.
bool lex_less(const CVec& a, const CVec& b) {
  for (int k = 0; k < a.size(); ++k) {
    if (a[k].real() != b[k].real()) return a[k].real() < b[k].real();
    if (a[k].imag() != b[k].imag()) return a[k].imag() < b[k].imag();
  }
  return false;
}

void gauge_fix_pair(Eigen::Ref<CVec> l, Eigen::Ref<CVec> r) {
  int k = 0;
  double best = -1.0;
  for (int i = 0; i < l.size(); ++i) {
    double m = std::abs(l[i]);
    if (m > best + 1e-15) {  // first index wins on ties
      best = m;
      k = i;
    }
  }
  if (best <= 0.0) return;
  Cx ph = l[k] / best;
  l *= std::conj(ph);
  r *= ph;
}

}  // namespace

SchmidtForm schmidt_decompose(const CVec& psi, int d_a, int d_b) {
  CMat m = state_matrix(psi, d_a, d_b);
  if (std::abs(psi.norm() - 1.0) > tol::norm_tol)
    throw std::invalid_argument("schmidt_decompose: state not normalized");

  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const int r = static_cast<int>(svd.singularValues().size());

  SchmidtForm form;
  form.coeffs = svd.singularValues();
  form.left = svd.matrixU();
  form.right = svd.matrixV().conjugate();  // M = U S V^dagger, so psi = sum s u (x) conj(v)

  for (int i = 0; i < r; ++i) gauge_fix_pair(form.left.col(i), form.right.col(i));

  // Singular values arrive descending; re-sort only to settle degenerate ties
  // deterministically.
  std::vector<int> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    double pa = form.coeffs[a] * form.coeffs[a];
    double pb = form.coeffs[b] * form.coeffs[b];
    if (std::abs(pa - pb) >= tol::eps_deg) return pa > pb;
    return lex_less(form.left.col(a), form.left.col(b));
  });

  SchmidtForm sorted;
  sorted.coeffs.resize(r);
  sorted.left.resize(d_a, r);
  sorted.right.resize(d_b, r);
  for (int i = 0; i < r; ++i) {
    sorted.coeffs[i] = form.coeffs[order[i]];
    sorted.left.col(i) = form.left.col(order[i]);
    sorted.right.col(i) = form.right.col(order[i]);
  }
  for (int i = 0; i + 1 < r; ++i) {
    double pa = sorted.coeffs[i] * sorted.coeffs[i];
    double pb = sorted.coeffs[i + 1] * sorted.coeffs[i + 1];
    if (std::abs(pa - pb) < tol::eps_deg) sorted.degenerate = true;
  }
  sorted.rank = 0;
  for (int i = 0; i < r; ++i)
    if (sorted.coeffs[i] * sorted.coeffs[i] > tol::eps_rank) ++sorted.rank;
  return sorted;
}

CMat partial_trace(const CVec& psi, int d_a, int d_b, int side) {
  if (side != 0 && side != 1) throw std::invalid_argument("partial_trace: side must be 0 or 1");
  CMat m = state_matrix(psi, d_a, d_b);
  if (side == 0) return m * m.adjoint();
  return m.transpose() * m.conjugate();
}

EigResult hermitian_eigendecomposition(const CMat& h) {
  if (h.rows() != h.cols()) throw DimensionError("hermitian_eigendecomposition: not square");
  if (!is_hermitian(h)) throw std::invalid_argument("hermitian_eigendecomposition: not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  if (es.info() != Eigen::Success)
    throw NumericalFailure("hermitian_eigendecomposition: solver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

CMat unitary_propagator(const CMat& h, double t, double hbar) {
  if (hbar <= 0.0) throw std::invalid_argument("unitary_propagator: hbar must be positive");
  EigResult eig = hermitian_eigendecomposition(h);
  CVec phases(eig.values.size());
  for (int i = 0; i < eig.values.size(); ++i) {
    double a = -eig.values[i] * t / hbar;
    phases[i] = Cx(std::cos(a), std::sin(a));
  }
  return eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
}

CMat orthonormal_completion(const CMat& cols, int dim) {
  if (cols.rows() != dim || cols.cols() > dim)
    throw DimensionError("orthonormal_completion: bad shapes");
  CMat basis(dim, dim);
  int have = static_cast<int>(cols.cols());
  basis.leftCols(have) = cols;
  int next = have;
  for (int cand = 0; cand < dim && next < dim; ++cand) {
    CVec v = basis_vector(dim, cand);
    for (int j = 0; j < next; ++j) v -= basis.col(j).dot(v) * basis.col(j);
    double n = v.norm();
    if (n < 0.5) continue;  // candidate nearly inside the span, skip
    basis.col(next++) = v / n;
  }
  // Rare fallback: pass again with a lower acceptance bar.
  for (int cand = 0; cand < dim && next < dim; ++cand) {
    CVec v = basis_vector(dim, cand);
    for (int j = 0; j < next; ++j) v -= basis.col(j).dot(v) * basis.col(j);
    double n = v.norm();
    if (n < 1e-6) continue;
    basis.col(next++) = v / n;
  }
  if (next < dim) throw NumericalFailure("orthonormal_completion: could not complete basis");
  return basis;
}

CVec basis_vector(int dim, int index) {
  if (index < 0 || index >= dim) throw DimensionError("basis_vector: index out of range");
  CVec v = CVec::Zero(dim);
  v[index] = 1.0;
  return v;
}

std::vector<int> max_weight_assignment(const RMat& score) {
  const int n = static_cast<int>(score.rows());
  if (score.cols() != n) throw DimensionError("max_weight_assignment: not square");
  if (n > 20) throw DimensionError("max_weight_assignment: too large");
  const int full = 1 << n;
  std::vector<double> best(full, -1e300);
  std::vector<int> pick(full, -1);
  std::vector<int> prev(full, -1);
  best[0] = 0.0;
  for (int mask = 0; mask < full; ++mask) {
    if (best[mask] <= -1e299) continue;
    int row = __builtin_popcount(static_cast<unsigned>(mask));
    if (row == n) continue;
    for (int col = 0; col < n; ++col) {
      if (mask & (1 << col)) continue;
      int nm = mask | (1 << col);
      double cand = best[mask] + score(row, col);
      if (cand > best[nm]) {
        best[nm] = cand;
        pick[nm] = col;
        prev[nm] = mask;
      }
    }
  }
  std::vector<int> assign(n, -1);
  int mask = full - 1;
  while (mask != 0) {
    int col = pick[mask];
    int row = __builtin_popcount(static_cast<unsigned>(prev[mask]));
    assign[row] = col;
    mask = prev[mask];
  }
  return assign;
}

}  // namespace sbl
