#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "sbl/types.hpp"

namespace sbl {

// Seeded generator with a fixed, fully specified algorithm. std::mt19937_64 is
// bit-exact across platforms, but the standard library distributions are not,
// so uniforms and Gaussians are derived here by hand:
//   uniform(): 53-bit mantissa from the top bits of one engine draw,
//   normal():  Box-Muller on two uniforms, second value cached.
// Identical seeds therefore give identical streams everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Complex Gaussian with independent N(0,1) real and imaginary parts.
  Cx cnormal() {
    double re = normal();
    double im = normal();
    return {re, im};
  }

  // Phase uniform on the unit circle.
  Cx phase() {
    double a = 2.0 * M_PI * uniform();
    return {std::cos(a), std::sin(a)};
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Gaussian Hermitian matrix: diagonal N(0,1), off-diagonal entries with
// independent real and imaginary parts of variance 1/2.
inline CMat random_hermitian(int dim, Rng& rng) {
  CMat h(dim, dim);
  for (int i = 0; i < dim; ++i) {
    h(i, i) = Cx(rng.normal(), 0.0);
    for (int j = i + 1; j < dim; ++j) {
      Cx z = rng.cnormal() / std::sqrt(2.0);
      h(i, j) = z;
      h(j, i) = std::conj(z);
    }
  }
  return h;
}

inline CVec random_state(int dim, Rng& rng) {
  CVec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.cnormal();
  v.normalize();
  return v;
}

// Haar-ish random unitary: QR of a complex Gaussian matrix with the R diagonal
// rotated positive.
inline CMat random_unitary(int dim, Rng& rng) {
  CMat g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = rng.cnormal();
  Eigen::HouseholderQR<CMat> qr(g);
  CMat q = qr.householderQ();
  CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < dim; ++i) {
    Cx d = r(i, i);
    double a = std::abs(d);
    q.col(i) *= (a > 0.0) ? d / a : Cx(1.0, 0.0);
  }
  return q;
}

}  // namespace sbl
