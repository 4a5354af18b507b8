#pragma once

// Single-site scattering data: closed forms, the transfer-matrix propagator and
// spectral shift values fixed by the high-energy normalization.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "disorderlab/potential.hpp"
#include "disorderlab/types.hpp"

namespace disorderlab {

struct ScatteringData {
  double energy = 0.0;
  double sqrt_energy = 0.0;
  cplx T{1.0, 0.0};
  cplx R{0.0, 0.0};  // reflection for a wave incident from the right
  cplx L{0.0, 0.0};  // reflection for a wave incident from the left
  double abs_T = 1.0;
  double delta_phase = 0.0;  // arg T, principal branch
  double theta_phase = 0.0;

  double unitarity_residual() const {
    return std::max(std::abs(std::norm(T) + std::norm(R) - 1.0), std::abs(std::norm(T) + std::norm(L) - 1.0));
  }
};

/// Λ = [[1/T, −R/T], [L/T, 1/T*]]; maps right-side plane-wave amplitudes to left-side ones.
struct TransferMatrix {
  Mat2 entries = Mat2::Identity();
};

/// Forward map of (u, u') from x_from to x_to.
struct FundamentalMatrix {
  Mat2 entries = Mat2::Identity();
  double x_from = 0.0;
  double x_to = 0.0;
};

struct PropagationResult {
  TransferMatrix transfer;
  double step = 0.0;
  bool coarse_step = false;  // step·√E > 0.1
};

inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * pi);
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

inline ScatteringData make_scattering(double energy, cplx T, cplx R, cplx L) {
  ScatteringData s;
  s.energy = energy;
  s.sqrt_energy = std::sqrt(energy);
  s.T = T;
  s.R = R;
  s.L = L;
  s.abs_T = std::abs(T);
  s.delta_phase = std::arg(T);
  s.theta_phase = std::abs(R) < 1e-14 ? 0.0 : wrap_angle(std::arg(R) - s.delta_phase - 0.5 * pi);
  return s;
}

inline TransferMatrix transfer_from_scattering(const ScatteringData& s) {
  TransferMatrix m;
  const cplx inv_t = 1.0 / s.T;
  m.entries << inv_t, -s.R * inv_t, s.L * inv_t, 1.0 / std::conj(s.T);
  return m;
}

inline ScatteringData s_matrix_delta(double alpha, double energy) {
  require_positive_energy(energy, "s_matrix_delta");
  const double beta = alpha / (2.0 * std::sqrt(energy));
  const cplx T = 1.0 / cplx(1.0, beta);
  const cplx R = cplx(0.0, -beta) * T;
  return make_scattering(energy, T, R, R);
}

// Amplitude basis (e^{ikx}, e^{−ikx}) to (u, u') at x.
inline Mat2 plane_wave_basis(double sqrt_energy, double x) {
  const double k = sqrt_energy;
  const cplx ep = std::polar(1.0, k * x), em = std::polar(1.0, -k * x);
  Mat2 p;
  p << ep, em, cplx(0.0, k) * ep, cplx(0.0, -k) * em;
  return p;
}

inline Mat2 plane_wave_basis_inverse(double sqrt_energy, double x) {
  const double k = sqrt_energy;
  const cplx ep = std::polar(1.0, k * x), em = std::polar(1.0, -k * x);
  // det P = −2ik
  Mat2 p;
  p << 0.5 * em, cplx(0.0, -0.5 / k) * em, 0.5 * ep, cplx(0.0, 0.5 / k) * ep;
  return p;
}

inline FundamentalMatrix fundamental_matrix(const TransferMatrix& lambda, double energy, double x_from, double x_to) {
  require_positive_energy(energy, "fundamental_matrix");
  const double k = std::sqrt(energy);
  const Mat2 adj_inv = [&] {
    const Mat2& m = lambda.entries;
    Mat2 r;
    r << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return Mat2(r / m.determinant());
  }();
  FundamentalMatrix f;
  f.entries = plane_wave_basis(k, x_to) * adj_inv * plane_wave_basis_inverse(k, x_from);
  f.x_from = x_from;
  f.x_to = x_to;
  return f;
}

inline ScatteringData scattering_from_transfer(const TransferMatrix& lambda, double energy) {
  require_positive_energy(energy, "scattering_from_transfer");
  const Mat2& m = lambda.entries;
  if (std::abs(m(0, 0)) < 1e-12) throw DomainError("zero transmission");
  const cplx T = 1.0 / m(0, 0);
  return make_scattering(energy, T, -m(0, 1) * T, m(1, 0) * T);
}

namespace detail {

inline cplx sinc(cplx q) {
  if (std::abs(q) < 1e-6) return 1.0 - q * q / 6.0;
  return std::sin(q) / q;
}

inline Mat2 square_transfer(double alpha, double energy) {
  const double k = std::sqrt(energy);
  const cplx q = std::sqrt(cplx(energy - alpha, 0.0));
  Mat2 phi_inv;  // inverse of the forward map across [−1/2, 1/2]
  const cplx c = std::cos(q), s = sinc(q);
  phi_inv << c, -s, q * q * s, c;
  return plane_wave_basis_inverse(k, -0.5) * phi_inv * plane_wave_basis(k, 0.5);
}

// Classical RK4 for Y' = Y·(i/2k) V(x) M(x), with steps aligned to the breakpoints.
// When phase != nullptr, the principal increments of arg Y₁₁ are accumulated.
template <class Potential>
Mat2 rk4_transfer(const Potential& v, double x0, double x1, double k, double step,
                  const std::vector<double>& breakpoints, double* phase) {
  std::vector<double> cuts{x0};
  for (double b : breakpoints)
    if (b > x0 && b < x1) cuts.push_back(b);
  cuts.push_back(x1);
  std::sort(cuts.begin(), cuts.end());

  // V is sampled strictly inside the current segment so jumps at breakpoints are one-sided.
  double seg_lo = x0, seg_hi = x1;
  const double c = 0.5 / k;
  auto rhs = [&](const Mat2& y, double x) -> Mat2 {
    const double nudge = 1e-12 * (seg_hi - seg_lo);
    const double vx = v(std::clamp(x, seg_lo + nudge, seg_hi - nudge));
    if (vx == 0.0) return Mat2::Zero();
    const cplx e = std::polar(1.0, 2.0 * k * x);
    const cplx g(0.0, c * vx);
    // Y·M with M = [[1, e*],[−e, −1]]
    Mat2 out;
    out(0, 0) = g * (y(0, 0) - y(0, 1) * e);
    out(0, 1) = g * (y(0, 0) * std::conj(e) - y(0, 1));
    out(1, 0) = g * (y(1, 0) - y(1, 1) * e);
    out(1, 1) = g * (y(1, 0) * std::conj(e) - y(1, 1));
    return out;
  };

  Mat2 y = Mat2::Identity();
  double acc = 0.0;
  for (std::size_t seg = 1; seg < cuts.size(); ++seg) {
    const double a = cuts[seg - 1], b = cuts[seg];
    if (!(b > a)) continue;
    seg_lo = a;
    seg_hi = b;
    const auto n = static_cast<long>(std::ceil((b - a) / step - 1e-9));
    const double h = (b - a) / static_cast<double>(std::max(1L, n));
    for (long i = 0; i < std::max(1L, n); ++i) {
      const double x = a + h * static_cast<double>(i);
      const Mat2 k1 = rhs(y, x);
      const Mat2 k2 = rhs(y + 0.5 * h * k1, x + 0.5 * h);
      const Mat2 k3 = rhs(y + 0.5 * h * k2, x + 0.5 * h);
      const Mat2 k4 = rhs(y + h * k3, x + h);
      const cplx before = y(0, 0);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (phase) acc += std::arg(y(0, 0) / before);
    }
  }
  if (phase) *phase = acc;
  return y;
}

}  // namespace detail

inline double default_step(double energy) { return std::min(1e-3, 0.05 / std::sqrt(energy)); }

/// Integrates the transfer-matrix propagator of V across [x0, x1].
inline PropagationResult propagate_U(const std::function<double(double)>& v, double x0, double x1, double energy,
                                     double step, const std::vector<double>& breakpoints = {}) {
  require_positive_energy(energy, "propagate_U");
  if (!(step > 0.0)) throw DomainError("propagate_U: step must be positive");
  if (!(x1 >= x0)) throw DomainError("propagate_U: x1 must not precede x0");
  const double k = std::sqrt(energy);
  PropagationResult r;
  r.step = step;
  r.coarse_step = step * k > 0.1;
  if (x1 > x0) r.transfer.entries = detail::rk4_transfer(v, x0, x1, k, step, breakpoints, nullptr);
  return r;
}

inline PropagationResult propagate_U(const SingleSitePotential& f, double alpha, double center, double energy,
                                     double step) {
  if (f.is_delta()) throw DomainError("propagate_U: delta potential is not pointwise evaluable");
  std::vector<double> bp = f.breakpoints();
  for (double& b : bp) b += center;
  return propagate_U([&](double x) { return alpha * f.evaluate(x - center); }, center - 0.5, center + 0.5, energy,
                     step, bp);
}

inline ScatteringData s_matrix_square(double alpha, double energy) {
  require_positive_energy(energy, "s_matrix_square");
  TransferMatrix m;
  m.entries = detail::square_transfer(alpha, energy);
  return scattering_from_transfer(m, energy);
}

/// Unwrapped arg(1/T) for the unit square barrier of height alpha, continuous in E and
/// vanishing as E → ∞.
inline double square_phase(double alpha, double energy) {
  const double k = std::sqrt(energy);
  if (energy > alpha) {
    const double q = std::sqrt(energy - alpha);
    const double c = (2.0 * energy - alpha) / (2.0 * k * q);
    const double m = std::round(q / pi);
    const double r = q - m * pi;
    return k - (m * pi + std::atan2(c * std::sin(r), std::cos(r)));
  }
  const double kappa = std::sqrt(alpha - energy);
  const double ratio = kappa < 1e-8 ? 1.0 : std::tanh(kappa) / kappa;
  return k - std::atan((2.0 * energy - alpha) * ratio / (2.0 * k));
}

/// Transfer matrix of αf(· − 0) together with the unwrapped arg(1/T) = πξ_α(E).
struct SiteFactor {
  Mat2 transfer = Mat2::Identity();
  double phase = 0.0;
};

inline SiteFactor site_factor(double alpha, const SingleSitePotential& f, double energy) {
  require_positive_energy(energy, "site_factor");
  const double k = std::sqrt(energy);
  SiteFactor out;
  if (alpha == 0.0) return out;
  switch (f.kind()) {
    case PotentialKind::delta: {
      const double beta = alpha / (2.0 * k);
      out.transfer << cplx(1.0, beta), cplx(0.0, beta), cplx(0.0, -beta), cplx(1.0, -beta);
      out.phase = std::atan(beta);
      return out;
    }
    case PotentialKind::square:
      out.transfer = detail::square_transfer(alpha, energy);
      out.phase = square_phase(alpha, energy);
      return out;
    case PotentialKind::tabulated: {
      // Slices short enough that arg Y₁₁ moves by at most 1/2 per step.
      const double vmax = std::abs(alpha) * f.sup();
      double step = default_step(energy);
      if (vmax > 0.0) step = std::min(step, 0.5 * k / vmax);
      const std::vector<double> bp = f.breakpoints();
      out.transfer = detail::rk4_transfer([&](double x) { return alpha * f.evaluate(x); }, -0.5, 0.5, k, step, bp,
                                          &out.phase);
      return out;
    }
  }
  return out;
}

inline ScatteringData site_scattering(double alpha, const SingleSitePotential& f, double energy) {
  if (f.is_delta()) return s_matrix_delta(alpha, energy);
  if (f.kind() == PotentialKind::square) return s_matrix_square(alpha, energy);
  TransferMatrix m;
  m.entries = site_factor(alpha, f, energy).transfer;
  return scattering_from_transfer(m, energy);
}

/// ξ_α(E) = −δ(E)/π with δ continued downward from an energy where the Born phase is small.
inline double xi_single(double alpha, double energy, const SingleSitePotential& f) {
  require_positive_energy(energy, "xi_single");
  if (alpha == 0.0) return 0.0;
  if (f.is_delta()) return std::atan(alpha / (2.0 * std::sqrt(energy))) / pi;

  const double strength = std::abs(alpha) * f.integral();
  const double peak = std::abs(alpha) * f.sup();
  const double e_high = std::max({energy, 100.0 * strength * strength, 100.0 * peak, 1.0});
  auto arg_t = [&](double e) { return std::arg(site_scattering(alpha, f, e).T); };

  double k = std::sqrt(e_high);
  const double k_end = std::sqrt(energy);
  double delta = arg_t(e_high);
  double prev = delta;
  double dk = 0.05;
  while (k > k_end) {
    const double k_next = std::max(k_end, k - dk);
    const double cur = arg_t(k_next == k_end ? energy : k_next * k_next);
    const double inc = wrap_angle(cur - prev);
    if (std::abs(inc) > 0.25 * pi && dk > 1e-6) {
      dk *= 0.5;
      continue;
    }
    delta += inc;
    prev = cur;
    k = k_next;
    dk = std::min(0.05, dk * 2.0);
  }
  return -delta / pi;
}

}  // namespace disorderlab
