#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace sbl {

using Cx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

// Numerical thresholds used throughout. Kept in one place so the tests and
// the library agree on what "zero" means.
namespace tol {
inline constexpr double eps_rank = 1e-12;       // Schmidt weight below this is an empty branch
inline constexpr double eps_deg = 1e-9;         // |p_i - p_j| below this counts as degenerate
inline constexpr double eps_gap_default = 1e-6; // resonance guard in the branch flow
inline constexpr double gap_threshold_default = 1e-3; // event scan: near-crossing cutoff
inline constexpr double norm_tol = 1e-10;
inline constexpr double herm_tol = 1e-10;
}  // namespace tol

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown by the branch flow when two occupied Schmidt weights collide while
// their coupling stays finite; carries the offending pair and gap.
struct DegenerateSpectrum : std::runtime_error {
  int branch_a = -1;
  int branch_b = -1;
  double gap = 0.0;
  DegenerateSpectrum(int a, int b, double g)
      : std::runtime_error("degenerate Schmidt spectrum: branches " + std::to_string(a) + "," +
                           std::to_string(b) + " gap " + std::to_string(g)),
        branch_a(a),
        branch_b(b),
        gap(g) {}
};

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config/schema problems; `path` names the offending field like "model.dims.a".
struct ValidationError : std::runtime_error {
  std::string path;
  ValidationError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), path(std::move(field)) {}
};

inline double hermiticity_error(const CMat& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const CMat& m, double tolerance = tol::herm_tol) {
  if (m.rows() != m.cols()) return false;
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return hermiticity_error(m) <= tolerance * scale;
}

inline bool is_unitary(const CMat& m, double tolerance = tol::norm_tol) {
  if (m.rows() != m.cols()) return false;
  CMat d = m.adjoint() * m - CMat::Identity(m.rows(), m.cols());
  return d.cwiseAbs().maxCoeff() <= tolerance * std::max<double>(1.0, m.rows());
}

}  // namespace sbl
