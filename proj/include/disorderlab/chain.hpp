#pragma once

// Tilted per-cell transfer matrices and their ordered products.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "disorderlab/potential.hpp"
#include "disorderlab/scattering.hpp"
#include "disorderlab/types.hpp"

namespace disorderlab {

/// Λ̃ = U^{a} Λ U^{b}, where Λ is the site matrix with the scatterer centred at 0 and a, b are the
/// half-gaps to the neighbouring sites (a = b = 1/2 on the unit lattice).
struct TiltedTransfer {
  Mat2 entries = Mat2::Identity();
  Mat2 core = Mat2::Identity();
  double sqrt_energy = 0.0;
  double left_half_gap = 0.5;
  double right_half_gap = 0.5;
  std::optional<double> core_phase;  // unwrapped arg(1/T) of the site, if known
};

inline TiltedTransfer tilt(const Mat2& core, double sqrt_energy, double left_half_gap, double right_half_gap,
                           std::optional<double> core_phase) {
  TiltedTransfer m;
  const double k = sqrt_energy;
  m.core = core;
  m.sqrt_energy = k;
  m.left_half_gap = left_half_gap;
  m.right_half_gap = right_half_gap;
  m.core_phase = core_phase;
  const double sum = left_half_gap + right_half_gap, diff = right_half_gap - left_half_gap;
  const cplx e_sum = std::polar(1.0, -k * sum);
  const cplx e_diff = diff == 0.0 ? cplx(1.0, 0.0) : std::polar(1.0, k * diff);
  m.entries(0, 0) = e_sum * core(0, 0);
  m.entries(0, 1) = e_diff * core(0, 1);
  m.entries(1, 0) = std::conj(e_diff) * core(1, 0);
  m.entries(1, 1) = std::conj(e_sum) * core(1, 1);
  return m;
}

inline TiltedTransfer tilted_transfer(const ScatteringData& s, std::optional<double> core_phase = std::nullopt) {
  return tilt(transfer_from_scattering(s).entries, s.sqrt_energy, 0.5, 0.5, core_phase);
}

inline TiltedTransfer tilted_transfer_general(const ScatteringData& s, double y_prev, double y_cur, double y_next,
                                              std::optional<double> core_phase = std::nullopt) {
  if (!(y_prev < y_cur && y_cur < y_next)) {
    throw DomainError("tilted_transfer_general: positions must satisfy y_prev < y_cur < y_next");
  }
  return tilt(transfer_from_scattering(s).entries, s.sqrt_energy, 0.5 * (y_cur - y_prev), 0.5 * (y_next - y_cur),
              core_phase);
}

inline TiltedTransfer tilted_site(double alpha, const SingleSitePotential& f, double energy,
                                  double left_half_gap = 0.5, double right_half_gap = 0.5) {
  const SiteFactor sf = site_factor(alpha, f, energy);
  return tilt(sf.transfer, std::sqrt(energy), left_half_gap, right_half_gap, sf.phase);
}

namespace detail {
// a/b without the inf/nan rescue path of the library complex division
inline cplx quotient(cplx a, cplx b) { return a * std::conj(b) / std::norm(b); }
}  // namespace detail

/// Renormalized running product of tilted factors, plus an untilted product of the site
/// matrices Λ_j = U^{c_j} Λ U^{−c_j} that yields 1/T of the chain.
///
/// product() = √2·e^{log_norm}·unit_matrix, so log_norm = log(‖Π‖_F/√2) ≥ 0 and vanishes for free
/// chains.
class ChainProductState {
 public:
  ChainProductState() = default;

  const Mat2& unit_matrix() const noexcept { return p_; }
  double log_norm() const noexcept { return log_norm_; }
  double arg_plus() const noexcept { return arg_plus_; }
  double arg_minus() const noexcept { return arg_minus_; }
  double arg_invT() const noexcept { return arg_inv_t_; }
  std::size_t site_count() const noexcept { return count_; }
  double length() const noexcept { return length_; }

  Mat2 product() const { return (std::sqrt(2.0) * std::exp(log_norm_)) * p_; }
  Mat2 untilted_product() const { return (std::sqrt(2.0) * std::exp(log_norm_q_)) * q_; }

  // log ‖Π‖ in operator norm; a product of unimodular factors never has norm below 1
  double log_operator_norm() const {
    if (reflectionless_) return 0.0;
    return std::max(0.0, log_norm_ + std::log(std::sqrt(2.0) * operator_norm(p_)));
  }
  // log |1/T| of the chain
  double log_inv_abs_T() const {
    if (reflectionless_) return 0.0;
    return log_norm_q_ + std::log(std::sqrt(2.0) * std::abs(q_(0, 0)));
  }

  void absorb(const TiltedTransfer& m) {
    const double k = m.sqrt_energy;
    const Mat2& c = m.core;
    const double a = m.left_half_gap, b = m.right_half_gap;

    // tilted tracker
    const cplx ea = std::polar(1.0, 2.0 * k * a);
    const cplx rho = detail::quotient(p_(0, 1), p_(0, 0)) * ea;
    const cplx sigma = detail::quotient(p_(1, 0), p_(1, 1)) * std::conj(ea);
    double inc_plus, inc_minus;
    if (m.core_phase) {
      inc_plus = *m.core_phase + std::arg(1.0 + rho * detail::quotient(c(1, 0), c(0, 0)));
      inc_minus = -*m.core_phase + std::arg(1.0 + sigma * detail::quotient(c(0, 1), c(1, 1)));
    } else {
      inc_plus = checked_increment(std::arg(c(0, 0) + rho * c(1, 0)));
      inc_minus = checked_increment(std::arg(c(1, 1) + sigma * c(0, 1)));
    }
    arg_plus_ += inc_plus - k * (a + b);
    arg_minus_ += inc_minus + k * (a + b);

    Mat2 next = p_ * m.entries;
    const double s = next.norm();
    p_ = next * (1.0 / s);
    log_norm_ += std::log(s);

    // untilted tracker
    if (count_ > 0) position_ += right_pending_ + a;
    right_pending_ = b;
    const cplx e = std::polar(1.0, 2.0 * k * position_);
    const cplx l10 = c(1, 0) * e, l01 = c(0, 1) * std::conj(e);
    const cplx rho_q = detail::quotient(q_(0, 1), q_(0, 0));
    if (m.core_phase) {
      arg_inv_t_ += *m.core_phase + std::arg(1.0 + rho_q * detail::quotient(l10, c(0, 0)));
    } else {
      arg_inv_t_ += checked_increment(std::arg(c(0, 0) + rho_q * l10));
    }
    Mat2 site;
    site << c(0, 0), l01, l10, c(1, 1);
    Mat2 nq = q_ * site;
    const double sq = nq.norm();
    q_ = nq * (1.0 / sq);
    log_norm_q_ += std::log(sq);

    length_ += a + b;
    ++count_;
    reflectionless_ = reflectionless_ && c(0, 1) == 0.0 && c(1, 0) == 0.0;
  }

 private:
  double checked_increment(double inc) const {
    if (std::abs(inc) >= 0.95 * pi) throw UnwrapHazard(count_, inc);
    return inc;
  }

  Mat2 p_ = Mat2::Identity() / std::sqrt(2.0);
  Mat2 q_ = Mat2::Identity() / std::sqrt(2.0);
  double log_norm_ = 0.0;
  double log_norm_q_ = 0.0;
  double arg_plus_ = 0.0;
  double arg_minus_ = 0.0;
  double arg_inv_t_ = 0.0;
  double position_ = 0.0;
  double right_pending_ = 0.0;
  double length_ = 0.0;
  std::size_t count_ = 0;
  bool reflectionless_ = true;  // every factor so far is a pure phase
};

inline ChainProductState absorb(ChainProductState state, const TiltedTransfer& m) {
  state.absorb(m);
  return state;
}

struct PairComposition {
  cplx T_combined;
  double xi12 = 0.0;
  double separation = 0.0;
};

/// Transmission of αf₁ at 0 followed by αf₂ at d, and the cluster defect
/// ξ₁₂ = ξ(pair) − ξ₁ − ξ₂ = arg(1 − R₁L₂e^{2i√E d})/π.
inline PairComposition compose_pair(const ScatteringData& s1, const ScatteringData& s2, double d) {
  if (s1.energy != s2.energy) throw DomainError("compose_pair: scattering data at different energies");
  const cplx z = 1.0 - s1.R * s2.L * std::polar(1.0, 2.0 * s1.sqrt_energy * d);
  PairComposition out;
  out.T_combined = s1.T * s2.T / z;
  out.xi12 = std::arg(z) / pi;
  out.separation = d;
  return out;
}

struct ChainCell {
  double alpha = 0.0;
  double center = 0.0;
};

/// One ODE propagation across Σ α_j f(· − y_j); the result is Λ in absolute coordinates.
inline TransferMatrix chain_transfer_direct(const SingleSitePotential& f, std::span<const ChainCell> cells,
                                            double energy, double step) {
  require_positive_energy(energy, "chain_transfer_direct");
  if (f.is_delta()) throw DomainError("chain_transfer_direct: delta sites have no pointwise potential");
  if (cells.empty()) return {};
  std::vector<double> centers;
  std::vector<double> bp;
  for (std::size_t j = 0; j < cells.size(); ++j) {
    if (j > 0 && !(cells[j].center - cells[j - 1].center >= f.support_width() - 1e-12)) {
      throw DomainError("chain_transfer_direct: cells must be ordered with disjoint supports");
    }
    centers.push_back(cells[j].center);
    for (double b : f.breakpoints()) bp.push_back(b + cells[j].center);
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  auto v = [&](double x) {
    auto it = std::upper_bound(centers.begin(), centers.end(), x + 0.5);
    double acc = 0.0;
    // at most two supports can touch x
    for (int back = 0; back < 2 && it != centers.begin(); ++back) {
      --it;
      const std::size_t j = static_cast<std::size_t>(it - centers.begin());
      acc += cells[j].alpha * f.evaluate(x - cells[j].center);
    }
    return acc;
  };
  return propagate_U(v, cells.front().center - 0.5, cells.back().center + 0.5, energy, step, bp).transfer;
}

/// Ordered product of Λ_j = U^{y_j} Λ_{α_j} U^{−y_j}.
inline TransferMatrix chain_transfer_product(const SingleSitePotential& f, std::span<const ChainCell> cells,
                                             double energy) {
  const double k = std::sqrt(energy);
  TransferMatrix out;
  for (const ChainCell& c : cells) {
    const Mat2 core = site_factor(c.alpha, f, energy).transfer;
    out.entries = out.entries * free_phase(k, c.center) * core * free_phase(k, -c.center);
  }
  return out;
}

/// Frobenius norm² of any transfer matrix with transmission T: (4 − 2|T|²)/|T|².
inline double transfer_frobenius_sq(double abs_T) { return (4.0 - 2.0 * abs_T * abs_T) / (abs_T * abs_T); }

// Quadratic form in a = sin θ₁, b = sin θ₂ that bounds tilted norms from below; never under
// tilted_norm_floor(E) on [−1, 1]² × [0, 1].
inline double tilted_norm_form(double a, double b, double energy, double B) {
  return 2.0 * B * B * (1.0 - a * a) + 2.0 * (1.0 - b * b) + (B * a - b) * (B * a - b) / energy +
         energy * (B * a + b) * (B * a + b);
}

inline double tilted_norm_floor(double energy) { return 4.0 * energy / (1.0 + energy * energy); }

}  // namespace disorderlab
