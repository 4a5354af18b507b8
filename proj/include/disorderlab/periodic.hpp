#pragma once

// Periodic reference (one coupling on every site) and scans for the special energies where
// the Lyapunov exponent can vanish despite disorder.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "disorderlab/chain.hpp"
#include "disorderlab/scattering.hpp"
#include "disorderlab/types.hpp"

namespace disorderlab {

// Keller's form 2cos(√E − πξ)/|T|.
inline double discriminant(double alpha, double energy, const SingleSitePotential& f) {
  const ScatteringData s = site_scattering(alpha, f, energy);
  if (s.abs_T < 1e-12) throw DomainError("discriminant: zero transmission");
  return 2.0 * std::cos(s.sqrt_energy - pi * xi_single(alpha, energy, f)) / s.abs_T;
}

// tr Λ̃ = 2 Re(e^{−i√E}/T).
inline double discriminant_trace(double alpha, double energy, const SingleSitePotential& f) {
  const SiteFactor sf = site_factor(alpha, f, energy);
  return 2.0 * (std::polar(1.0, -std::sqrt(energy)) * sf.transfer(0, 0)).real();
}

struct BandInfo {
  double energy = 0.0;
  double discriminant = 0.0;
  bool in_gap = false;
  cplx lambda_plus;
  cplx lambda_minus;
  double gamma_periodic = 0.0;
  double N_periodic = 0.0;
};

inline BandInfo band_info(double energy, double delta, double rotation) {
  BandInfo b;
  b.energy = energy;
  b.discriminant = delta;
  b.in_gap = std::abs(delta) > 2.0;
  const cplx root = std::sqrt(cplx(0.25 * delta * delta - 1.0, 0.0));
  b.lambda_plus = 0.5 * delta - root;
  b.lambda_minus = 0.5 * delta + root;
  b.gamma_periodic = b.in_gap ? std::acosh(0.5 * std::abs(delta)) : 0.0;
  b.N_periodic = rotation / pi;
  return b;
}

namespace detail {

// Rotation angle bookkeeping while sweeping √E upward: m counts completed bands and
// s = (−1)^m Δ runs from +2 down to −2 across band m. Inside a band s is strictly decreasing, so
// an increasing s means a closed gap was passed.
class RotationTracker {
 public:
  double update(double delta, double slope) {
    double s = sign() * delta;
    const double ds = sign() * slope;
    if (s <= -2.0 || (s < 2.0 && ds > 0.0)) {
      ++m_;
      s = -s;
    }
    const bool in_band = s < 2.0;
    return static_cast<double>(m_) * pi + (in_band ? std::acos(std::clamp(0.5 * s, -1.0, 1.0)) : 0.0);
  }

 private:
  double sign() const { return (m_ % 2 == 0) ? 1.0 : -1.0; }
  long m_ = 0;
};

}  // namespace detail

/// Band data on an increasing grid of positive energies; the rotation number is tracked by a
/// sweep in √E from near zero.
inline std::vector<BandInfo> periodic_reference_grid(double alpha, const std::vector<double>& grid,
                                                     const SingleSitePotential& f) {
  if (alpha < 0.0) {
    throw DomainError("periodic_reference: negative couplings put spectrum below 0; not supported");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require_positive_energy(grid[i], "periodic_reference");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError("periodic_reference: grid must be increasing");
  }
  std::vector<BandInfo> out;
  out.reserve(grid.size());
  detail::RotationTracker tracker;
  double k = 1e-3;
  const double dk = 2e-3;
  auto slope = [&](double kk) {
    const double h = 1e-6 * std::max(1.0, kk);
    return (discriminant_trace(alpha, (kk + h) * (kk + h), f) - discriminant_trace(alpha, kk * kk, f)) / h;
  };
  for (double e : grid) {
    const double k_target = std::sqrt(e);
    while (k < k_target) {
      tracker.update(discriminant_trace(alpha, k * k, f), slope(k));
      k += dk;
    }
    const double delta = discriminant_trace(alpha, e, f);
    // evaluate without committing so later grid points see the same sweep
    detail::RotationTracker probe = tracker;
    out.push_back(band_info(e, delta, probe.update(delta, slope(k_target))));
  }
  return out;
}

inline BandInfo periodic_reference(double alpha, double energy, const SingleSitePotential& f) {
  return periodic_reference_grid(alpha, {energy}, f).front();
}

/// Energies in (e_lo, e_hi] where |Δ| crosses 2, refined by bisection.
inline std::vector<double> band_edges(double alpha, const SingleSitePotential& f, double e_lo, double e_hi,
                                      double dk = 2e-3) {
  std::vector<double> edges;
  auto g = [&](double k) { return std::abs(discriminant_trace(alpha, k * k, f)) - 2.0; };
  double k0 = std::sqrt(std::max(e_lo, kMinEnergy));
  double g0 = g(k0);
  const double k_end = std::sqrt(e_hi);
  while (k0 < k_end) {
    const double k1 = std::min(k_end, k0 + dk);
    const double g1 = g(k1);
    if ((g0 > 0.0) != (g1 > 0.0)) {
      double lo = k0, hi = k1, glo = g0;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if ((gm > 0.0) == (glo > 0.0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      edges.push_back(0.25 * (lo + hi) * (lo + hi));
    }
    k0 = k1;
    g0 = g1;
  }
  return edges;
}

struct SpecialEnergyReport {
  std::vector<double> candidates_S;
  std::vector<double> candidates_S_pm;
  std::vector<double> candidates_S_tilde;
  std::vector<double> energies;
  std::vector<cplx> fourier_test;       // ∫e^{2i√E x} f(x) dx per grid energy
  std::vector<double> max_abs_R;        // per grid energy
  std::vector<double> F_plus_spread;    // per grid energy (NaN when every α was skipped)
  std::vector<double> F_minus_spread;
  std::vector<double> max_alignment;    // max_α cos²(√E − πξ_α) − |T_α|²
};

/// F_E^(±)(α) = (−i sin(√E − πξ) ± √(cos²(√E − πξ) − |T|²)) / (R e^{iπξ}).
inline std::pair<cplx, cplx> special_F(const ScatteringData& s, double xi) {
  const double phi = s.sqrt_energy - pi * xi;
  const cplx root = std::sqrt(cplx(std::cos(phi) * std::cos(phi) - s.abs_T * s.abs_T, 0.0));
  const cplx denom = s.R * std::polar(1.0, pi * xi);
  const cplx lead(0.0, -std::sin(phi));
  return {(lead + root) / denom, (lead - root) / denom};
}

inline SpecialEnergyReport special_energy_scan(const SingleSitePotential& f, const std::vector<double>& alpha_grid,
                                               const std::vector<double>& energy_grid, double tol = 1e-8,
                                               double tol_F = 1e-6) {
  if (alpha_grid.empty() || energy_grid.empty()) throw DomainError("special_energy_scan: empty grid");
  if (!(tol > 0.0) || !(tol_F > 0.0)) throw DomainError("special_energy_scan: tolerances must be positive");
  SpecialEnergyReport rep;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double e : energy_grid) {
    require_positive_energy(e, "special_energy_scan");
    double max_r = 0.0, max_align = -std::numeric_limits<double>::infinity();
    bool any = false;
    std::vector<cplx> fps, fms;
    for (double a : alpha_grid) {
      const SiteFactor sf = site_factor(a, f, e);
      TransferMatrix tm;
      tm.entries = sf.transfer;
      const ScatteringData s = scattering_from_transfer(tm, e);
      const double xi = sf.phase / pi;
      max_r = std::max(max_r, std::abs(s.R));
      const double phi = s.sqrt_energy - pi * xi;
      max_align = std::max(max_align, std::cos(phi) * std::cos(phi) - s.abs_T * s.abs_T);
      if (std::abs(s.R) < tol) continue;
      const auto [fp, fm] = special_F(s, xi);
      fps.push_back(fp);
      fms.push_back(fm);
      any = true;
    }
    // spread = largest pairwise distance
    auto spread = [](const std::vector<cplx>& v) {
      double d = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j) d = std::max(d, std::abs(v[i] - v[j]));
      return d;
    };
    const double sp = any ? spread(fps) : nan;
    const double sm = any ? spread(fms) : nan;

    const bool in_s = max_r < tol;
    const bool in_pm = any && (sp < tol_F || sm < tol_F);
    rep.energies.push_back(e);
    rep.fourier_test.push_back(f.fourier(std::sqrt(e)));
    rep.max_abs_R.push_back(max_r);
    rep.F_plus_spread.push_back(sp);
    rep.F_minus_spread.push_back(sm);
    rep.max_alignment.push_back(max_align);
    if (in_s) rep.candidates_S.push_back(e);
    if (in_pm) rep.candidates_S_pm.push_back(e);
    if ((in_s || in_pm) && max_align <= tol) rep.candidates_S_tilde.push_back(e);
  }
  return rep;
}

}  // namespace disorderlab
