#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace disorderlab {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;

inline constexpr double pi = std::numbers::pi;

// Scattering quantities degenerate as E -> 0 (|T| -> 0); everything works at E >= kMinEnergy.
inline constexpr double kMinEnergy = 1e-6;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Raised when a per-factor phase increment is too close to the branch cut to be trusted.
class UnwrapHazard : public std::runtime_error {
 public:
  UnwrapHazard(std::size_t site, double increment)
      : std::runtime_error("unwrap hazard at site " + std::to_string(site) +
                           " (principal increment " + std::to_string(increment) + ")"),
        site_(site),
        increment_(increment) {}

  std::size_t site() const noexcept { return site_; }
  double increment() const noexcept { return increment_; }

 private:
  std::size_t site_;
  double increment_;
};

inline void require_positive_energy(double energy, const char* where) {
  if (!std::isfinite(energy) || energy < kMinEnergy) {
    throw DomainError(std::string(where) + ": energy must be >= " + std::to_string(kMinEnergy) +
                      " (got " + std::to_string(energy) + ")");
  }
}

inline double frobenius_norm(const Mat2& m) { return m.norm(); }

// Largest singular value of a 2x2 matrix.
inline double operator_norm(const Mat2& m) {
  const double f2 = m.squaredNorm();
  const double det = std::abs(m.determinant());
  const double disc = std::max(0.0, f2 * f2 - 4.0 * det * det);
  return std::sqrt(0.5 * (f2 + std::sqrt(disc)));
}

// diag(e^{-i k s}, e^{i k s}), i.e. U_E^s with U_E = diag(e^{-i sqrt E}, e^{i sqrt E}).
inline Mat2 free_phase(double sqrt_energy, double s) {
  Mat2 u = Mat2::Zero();
  u(0, 0) = std::polar(1.0, -sqrt_energy * s);
  u(1, 1) = std::polar(1.0, sqrt_energy * s);
  return u;
}

// Residual of the a,b / b*,a* structure shared by all transfer matrices here.
inline double conjugate_structure_residual(const Mat2& m) {
  return std::max(std::abs(m(1, 1) - std::conj(m(0, 0))), std::abs(m(1, 0) - std::conj(m(0, 1))));
}

}  // namespace disorderlab
