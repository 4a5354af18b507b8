#pragma once

// Thouless formula and the Stieltjes transform of a tabulated spectral shift density.
//
// Between grid points ξ is taken piecewise linear; below the first grid point it vanishes and
// beyond the last it follows c/√E'. Every integral against that model is done in closed form.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "disorderlab/types.hpp"

namespace disorderlab {

struct SsdTable {
  std::vector<double> grid;
  std::vector<double> xi;
  std::vector<double> xi_err;  // optional, same length as grid when present
  double tail_coefficient = 0.0;

  SsdTable() = default;
  SsdTable(std::vector<double> g, std::vector<double> x, std::vector<double> err = {})
      : grid(std::move(g)), xi(std::move(x)), xi_err(std::move(err)) {
    validate();
    tail_coefficient = fit_tail(grid, xi);
  }

  void validate() const {
    if (grid.size() != xi.size() || grid.size() < 2) {
      throw DomainError("SsdTable: need at least two (E, xi) rows of equal count");
    }
    if (!xi_err.empty() && xi_err.size() != grid.size()) throw DomainError("SsdTable: xi_err length mismatch");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!std::isfinite(grid[i]) || !std::isfinite(xi[i])) throw DomainError("SsdTable: non-finite entry");
      if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError("SsdTable: grid must be strictly increasing");
    }
  }

  // Least squares for ξ ≈ c/√E' on the last decade of the grid.
  static double fit_tail(const std::vector<double>& g, const std::vector<double>& x) {
    const double top = g.back();
    if (!(top > 0.0)) return 0.0;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i] < 0.1 * top || g[i] <= 0.0) continue;
      num += x[i] / std::sqrt(g[i]);
      den += 1.0 / g[i];
    }
    return den > 0.0 ? num / den : 0.0;
  }
};

namespace detail {

// ∫ log|u| du antiderivative
inline double log_antiderivative(double u) { return u == 0.0 ? 0.0 : u * (std::log(std::abs(u)) - 1.0); }

inline double log_abs(double u) {
  if (u == 0.0) throw DomainError("thouless: evaluation energy coincides with a point mass");
  return std::log(std::abs(u));
}

// −∫ log|E − E'| dξ(E') for the table model, valid for any E outside point masses.
inline double log_potential(const SsdTable& t, double e) {
  const auto& g = t.grid;
  const auto& x = t.xi;
  double acc = 0.0;
  if (x.front() != 0.0) acc -= x.front() * log_abs(e - g.front());
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double slope = (x[i] - x[i - 1]) / (g[i] - g[i - 1]);
    if (slope == 0.0) continue;
    acc -= slope * (log_antiderivative(g[i] - e) - log_antiderivative(g[i - 1] - e));
  }
  const double a = g.back();
  const double c = t.tail_coefficient;
  if (c != 0.0 && a > 0.0) {
    const double sa = std::sqrt(a);
    const double jump = c / sa - x.back();
    if (jump != 0.0) acc -= jump * log_abs(a - e);
    double j;
    if (e > 0.0) {
      const double se = std::sqrt(e);
      j = std::log((sa + se) / (sa - se)) / se;
    } else if (e == 0.0) {
      j = 2.0 / sa;
    } else {
      const double se = std::sqrt(-e);
      j = 2.0 / se * std::atan(se / sa);
    }
    acc += c * (std::log(a - e) / sa + j);
  } else if (x.back() != 0.0) {
    acc += x.back() * log_abs(a - e);
  }
  return acc;
}

}  // namespace detail

/// −∫ log|E − E'| dξ(E') at an interior grid energy.
inline double thouless_rhs(const SsdTable& table, double energy) {
  table.validate();
  const auto& g = table.grid;
  const auto lo = std::lower_bound(g.begin(), g.end(), energy) - g.begin();
  const auto hi = std::upper_bound(g.begin(), g.end(), energy) - g.begin();
  if (lo < 3 || static_cast<std::ptrdiff_t>(g.size()) - hi < 3) {
    throw DomainError("thouless_rhs: energy must have at least 3 grid points on each side");
  }
  return detail::log_potential(table, energy);
}

/// γ(E) for E ≤ 0 from the table: √(−E) − ∫ log|E − E'| dξ(E').
inline double negative_energy_gamma(const SsdTable& table, double energy) {
  table.validate();
  if (energy > 0.0) throw DomainError("negative_energy_gamma: energy must be <= 0");
  if (table.grid.front() < 0.0) throw DomainError("negative_energy_gamma: unsupported regime (table below 0)");
  return std::sqrt(-energy) + detail::log_potential(table, energy);
}

struct StieltjesResult {
  cplx z;
  cplx W;
  cplx w;
};

/// W(z) = −∫ ξ(E')/(E' − z) dE' and w = W − √(−z).
inline StieltjesResult stieltjes_w(const SsdTable& table, cplx z) {
  table.validate();
  if (!(z.imag() > 0.0)) throw DomainError("stieltjes_w: Im z must be positive");
  const auto& g = table.grid;
  const auto& x = table.xi;
  cplx integral{0.0, 0.0};
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double a = g[i - 1], b = g[i];
    const double slope = (x[i] - x[i - 1]) / (b - a);
    const double intercept = x[i - 1] - slope * a;
    // ∫_a^b (intercept + slope·E')/(E' − z) dE'
    integral += slope * (b - a) + (intercept + slope * z) * (std::log(b - z) - std::log(a - z));
  }
  const double big = g.back();
  if (table.tail_coefficient != 0.0 && big > 0.0) {
    const cplx s = std::sqrt(z);
    const double sa = std::sqrt(big);
    // ∫_A^∞ E'^{-1/2}/(E' − z) dE'
    integral += table.tail_coefficient * (-std::log((sa - s) / (sa + s)) / s);
  }
  StieltjesResult r;
  r.z = z;
  r.W = -integral;
  r.w = r.W - std::sqrt(-z);
  return r;
}

}  // namespace disorderlab
