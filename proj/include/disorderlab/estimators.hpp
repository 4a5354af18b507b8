#pragma once

// Monte Carlo estimators over disordered chains: Lyapunov exponent, integrated density of
// states, spectral shift density and the complex log-transmission density.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "disorderlab/chain.hpp"
#include "disorderlab/parallel.hpp"
#include "disorderlab/potential.hpp"
#include "disorderlab/types.hpp"

namespace disorderlab {

struct DisorderConfig {
  SingleSitePotential potential = SingleSitePotential::delta();
  CouplingEnsemble ensemble = CouplingEnsemble::uniform(0.0, 1.0, 0);
  CellLayout layout = CellLayout::unit();
  std::size_t n_sites = 10000;
  std::size_t replicas = 8;

  void validate() const {
    if (n_sites < 1) throw DomainError("n_sites must be >= 1");
    if (replicas < 1) throw DomainError("replicas must be >= 1");
    layout.check_supports(n_sites, potential.support_width());
  }
};

struct DensityEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_sites = 0;
  std::size_t replicas = 0;
};

struct ComplexDensityEstimate {
  cplx value;
  double std_error_re = 0.0;
  double std_error_im = 0.0;
  std::size_t n_sites = 0;
  std::size_t replicas = 0;
};

inline double free_dos(double energy) { return energy > 0.0 ? std::sqrt(energy) / pi : 0.0; }
inline double free_gamma(double energy) { return std::sqrt(std::max(0.0, -energy)); }

inline double combined_error(double a, double b) { return std::hypot(a, b); }

/// Per-replica densities from one chain realization.
struct ReplicaResult {
  double gamma = 0.0;
  double dos = 0.0;
  double ssd = 0.0;
  cplx log_t;
};

inline ChainProductState build_chain(const DisorderConfig& config, double energy, std::uint64_t replica) {
  require_positive_energy(energy, "chain estimate");
  config.validate();
  ChainProductState state;
  const std::size_t n = config.n_sites;
  for (std::size_t j = 0; j < n; ++j) {
    const double alpha = config.ensemble.sample(replica, j);
    const double a = 0.5 * config.layout.gap_before(j);
    const double b = 0.5 * config.layout.gap_after(j, n);
    state.absorb(tilted_site(alpha, config.potential, energy, a, b));
  }
  return state;
}

inline ReplicaResult run_replica(const DisorderConfig& config, double energy, std::uint64_t replica) {
  const ChainProductState st = build_chain(config, energy, replica);
  const double len = st.length();
  ReplicaResult r;
  r.gamma = st.log_operator_norm() / len;
  r.dos = 0.5 * (-st.arg_plus() + st.arg_minus()) / (pi * len);
  r.ssd = st.arg_invT() / (pi * len);
  r.log_t = cplx(-st.log_inv_abs_T(), -st.arg_invT()) / len;
  return r;
}

namespace detail {

template <class Get>
DensityEstimate reduce(const std::vector<ReplicaResult>& rs, std::size_t n_sites, Get get) {
  DensityEstimate e;
  e.n_sites = n_sites;
  e.replicas = rs.size();
  double mean = 0.0;
  for (const auto& r : rs) mean += get(r);
  mean /= static_cast<double>(rs.size());
  double ss = 0.0;
  for (const auto& r : rs) ss += (get(r) - mean) * (get(r) - mean);
  e.value = mean;
  if (rs.size() > 1) e.std_error = std::sqrt(ss / static_cast<double>(rs.size() - 1) / static_cast<double>(rs.size()));
  return e;
}

}  // namespace detail

struct EnergyEstimates {
  double energy = 0.0;
  DensityEstimate gamma;
  DensityEstimate dos;
  DensityEstimate ssd;
  ComplexDensityEstimate log_t;
};

inline EnergyEstimates summarize(double energy, const std::vector<ReplicaResult>& rs, std::size_t n_sites) {
  EnergyEstimates out;
  out.energy = energy;
  out.gamma = detail::reduce(rs, n_sites, [](const ReplicaResult& r) { return r.gamma; });
  out.dos = detail::reduce(rs, n_sites, [](const ReplicaResult& r) { return r.dos; });
  out.ssd = detail::reduce(rs, n_sites, [](const ReplicaResult& r) { return r.ssd; });
  const DensityEstimate re = detail::reduce(rs, n_sites, [](const ReplicaResult& r) { return r.log_t.real(); });
  const DensityEstimate im = detail::reduce(rs, n_sites, [](const ReplicaResult& r) { return r.log_t.imag(); });
  out.log_t.value = {re.value, im.value};
  out.log_t.std_error_re = re.std_error;
  out.log_t.std_error_im = im.std_error;
  out.log_t.n_sites = n_sites;
  out.log_t.replicas = rs.size();
  return out;
}

inline EnergyEstimates estimate_all(const DisorderConfig& config, double energy) {
  config.validate();
  std::vector<ReplicaResult> rs(config.replicas);
  parallel_for(config.replicas, [&](std::size_t r) { rs[r] = run_replica(config, energy, r); });
  return summarize(energy, rs, config.n_sites);
}

inline DensityEstimate lyapunov(const DisorderConfig& config, double energy) { return estimate_all(config, energy).gamma; }
inline DensityEstimate dos(const DisorderConfig& config, double energy) { return estimate_all(config, energy).dos; }
inline DensityEstimate ssd(const DisorderConfig& config, double energy) { return estimate_all(config, energy).ssd; }
inline ComplexDensityEstimate log_T_density(const DisorderConfig& config, double energy) {
  return estimate_all(config, energy).log_t;
}

struct ScanSelection {
  bool gamma = true;
  bool dos = true;
  bool ssd = true;
  bool log_t = true;

  bool empty() const { return !(gamma || dos || ssd || log_t); }
};

struct ScanRow {
  EnergyEstimates estimates;
  bool ok = true;
  std::vector<std::string> flags;
};

// Distance to the nearest (πk)², k ≥ 1.
inline bool near_special_energy(double energy, double tol = 1e-6) {
  if (!(energy > 0.0)) return false;
  const double m = std::max(1.0, std::round(std::sqrt(energy) / pi));
  return std::abs(energy - (pi * m) * (pi * m)) < tol;
}

/// One row per grid energy; per-row failures become flags and never abort the scan.
inline std::vector<ScanRow> scan(const DisorderConfig& config, const std::vector<double>& grid,
                                 const ScanSelection& which = {}) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw DomainError("scan: energy grid must be strictly increasing");
  }
  config.validate();
  std::vector<ScanRow> rows(grid.size());
  if (which.empty()) return rows;

  const std::size_t reps = config.replicas;
  std::vector<ReplicaResult> results(grid.size() * reps);
  std::vector<int> status(grid.size() * reps, 0);  // 0 ok, 1 unwrap hazard, 2 domain
  parallel_for(results.size(), [&](std::size_t t) {
    const std::size_t i = t / reps, r = t % reps;
    try {
      results[t] = run_replica(config, grid[i], r);
    } catch (const UnwrapHazard&) {
      status[t] = 1;
    } catch (const DomainError&) {
      status[t] = 2;
    }
  });

  for (std::size_t i = 0; i < grid.size(); ++i) {
    ScanRow& row = rows[i];
    row.estimates.energy = grid[i];
    bool unwrap = false, domain = false;
    for (std::size_t r = 0; r < reps; ++r) {
      unwrap |= status[i * reps + r] == 1;
      domain |= status[i * reps + r] == 2;
    }
    if (unwrap) row.flags.emplace_back("UNWRAP");
    if (domain) row.flags.emplace_back("DOMAIN");
    if (near_special_energy(grid[i])) row.flags.emplace_back("SPECIAL");
    row.ok = !(unwrap || domain);
    if (row.ok) {
      std::vector<ReplicaResult> rs(results.begin() + static_cast<std::ptrdiff_t>(i * reps),
                                    results.begin() + static_cast<std::ptrdiff_t>((i + 1) * reps));
      row.estimates = summarize(grid[i], rs, config.n_sites);
    }
  }
  return rows;
}

}  // namespace disorderlab
