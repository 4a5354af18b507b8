#pragma once

// Single-site potentials, the random coupling ensemble and cell layouts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "disorderlab/types.hpp"

namespace disorderlab {

enum class PotentialKind { delta, square, tabulated };

inline const char* to_string(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::delta: return "delta";
    case PotentialKind::square: return "square";
    case PotentialKind::tabulated: return "tabulated";
  }
  return "?";
}

/// Shape f of one scatterer, supported in [-1/2, 1/2] and nonnegative.
///
/// The delta kind is the point interaction at x = 0 (distributional, unit weight). The square
/// kind is the indicator of [-1/2, 1/2]. Tabulated shapes interpolate (x, v) samples linearly
/// and vanish outside the sampled range.
class SingleSitePotential {
 public:
  static SingleSitePotential delta() { return SingleSitePotential(PotentialKind::delta, {}, {}); }
  static SingleSitePotential square() { return SingleSitePotential(PotentialKind::square, {}, {}); }

  static SingleSitePotential tabulated(std::vector<double> x, std::vector<double> v) {
    if (x.size() != v.size() || x.size() < 2) {
      throw DomainError("tabulated potential needs at least two (x, v) samples of equal count");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i]) || !std::isfinite(v[i])) {
        throw DomainError("tabulated potential: non-finite sample");
      }
      if (x[i] < -0.5 || x[i] > 0.5) {
        throw DomainError("tabulated potential: sample x=" + std::to_string(x[i]) +
                          " outside [-1/2, 1/2]");
      }
      if (v[i] < 0.0) {
        throw DomainError("tabulated potential: negative value at x=" + std::to_string(x[i]));
      }
      if (i > 0 && !(x[i] > x[i - 1])) {
        throw DomainError("tabulated potential: sample grid must be strictly increasing");
      }
    }
    return SingleSitePotential(PotentialKind::tabulated, std::move(x), std::move(v));
  }

  PotentialKind kind() const noexcept { return kind_; }
  bool is_delta() const noexcept { return kind_ == PotentialKind::delta; }

  std::span<const double> sample_x() const noexcept { return xs_; }
  std::span<const double> sample_v() const noexcept { return vs_; }

  double evaluate(double x) const {
    switch (kind_) {
      case PotentialKind::delta:
        throw DomainError("delta potential is not pointwise evaluable");
      case PotentialKind::square:
        return (x >= -0.5 && x <= 0.5) ? 1.0 : 0.0;
      case PotentialKind::tabulated: {
        if (x < xs_.front() || x > xs_.back()) return 0.0;
        auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        if (it == xs_.end()) return vs_.back();
        const std::size_t i = static_cast<std::size_t>(it - xs_.begin());
        const double t = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
        return vs_[i - 1] + t * (vs_[i] - vs_[i - 1]);
      }
    }
    return 0.0;
  }

  // ∫ f dx
  double integral() const {
    if (kind_ != PotentialKind::tabulated) return 1.0;
    double s = 0.0;
    for (std::size_t i = 1; i < xs_.size(); ++i) s += 0.5 * (vs_[i] + vs_[i - 1]) * (xs_[i] - xs_[i - 1]);
    return s;
  }

  // sup |f|; the delta reports its weight.
  double sup() const {
    if (kind_ != PotentialKind::tabulated) return 1.0;
    return *std::max_element(vs_.begin(), vs_.end());
  }

  // Positions where f may be non-smooth; propagators align their steps with these.
  std::vector<double> breakpoints() const {
    if (kind_ == PotentialKind::tabulated) return xs_;
    return {-0.5, 0.5};
  }

  // Width of the support interval used for overlap checks.
  double support_width() const { return kind_ == PotentialKind::delta ? 0.0 : 1.0; }

  // ∫ e^{2ikx} f(x) dx; vanishing is necessary for reflectionless energies.
  cplx fourier(double k) const {
    const double w = 2.0 * k;
    switch (kind_) {
      case PotentialKind::delta:
        return {1.0, 0.0};
      case PotentialKind::square:
        return {std::abs(k) < 1e-12 ? 1.0 : std::sin(k) / k, 0.0};
      case PotentialKind::tabulated: {
        // exact for the piecewise-linear interpolant
        cplx acc{0.0, 0.0};
        for (std::size_t i = 1; i < xs_.size(); ++i) {
          const double a = xs_[i - 1], b = xs_[i];
          const double fa = vs_[i - 1], fb = vs_[i];
          const double h = b - a;
          if (std::abs(w * h) < 1e-4) {
            const double xm = 0.5 * (a + b);
            acc += 0.5 * (fa + fb) * h * std::polar(1.0, w * xm);
            continue;
          }
          const double slope = (fb - fa) / h;
          const cplx ea = std::polar(1.0, w * a), eb = std::polar(1.0, w * b);
          const cplx iw{0.0, w};
          // ∫ (fa + slope (x-a)) e^{iwx} dx
          acc += (fb * eb - fa * ea) / iw - slope * (eb - ea) / (iw * iw);
        }
        return acc;
      }
    }
    return {};
  }

  bool operator==(const SingleSitePotential&) const = default;

 private:
  SingleSitePotential(PotentialKind kind, std::vector<double> x, std::vector<double> v)
      : kind_(kind), xs_(std::move(x)), vs_(std::move(v)) {}

  PotentialKind kind_;
  std::vector<double> xs_;
  std::vector<double> vs_;
};

inline double evaluate(const SingleSitePotential& f, double x) { return f.evaluate(x); }

namespace detail {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based uniform in [0, 1): a pure function of (seed, replica, site).
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t replica, std::uint64_t site) noexcept {
  const std::uint64_t h = mix64(mix64(mix64(seed) ^ replica) ^ (site * 0xd1b54a32d192ed03ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace detail

enum class DensityKind { uniform, truncated_gaussian, tabulated };

/// i.i.d. couplings on [lower, upper] with density phi.
class CouplingEnsemble {
 public:
  static constexpr std::size_t kCdfTableSize = 4096;

  static CouplingEnsemble uniform(double lower, double upper, std::uint64_t seed) {
    CouplingEnsemble e(DensityKind::uniform, lower, upper, seed);
    return e;
  }

  static CouplingEnsemble truncated_gaussian(double lower, double upper, double mean, double sigma,
                                             std::uint64_t seed) {
    if (!(sigma > 0.0) || !std::isfinite(mean)) {
      throw DomainError("truncated gaussian needs finite mean and sigma > 0");
    }
    CouplingEnsemble e(DensityKind::truncated_gaussian, lower, upper, seed);
    e.mean_ = mean;
    e.sigma_ = sigma;
    if (lower < upper) {
      const boost::math::normal_distribution<double> nd(mean, sigma);
      e.cdf_lo_ = boost::math::cdf(nd, lower);
      e.cdf_hi_ = boost::math::cdf(nd, upper);
      if (!(e.cdf_hi_ > e.cdf_lo_)) {
        throw DomainError("truncated gaussian has no mass on the support interval");
      }
    }
    return e;
  }

  /// pdf values on a strictly increasing grid; the support is [grid.front(), grid.back()].
  static CouplingEnsemble tabulated(std::vector<double> grid, std::vector<double> pdf, std::uint64_t seed) {
    if (grid.size() != pdf.size() || grid.size() < 2) {
      throw DomainError("tabulated pdf needs at least two (alpha, pdf) points of equal count");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!std::isfinite(grid[i]) || !std::isfinite(pdf[i])) throw DomainError("tabulated pdf: non-finite entry");
      if (pdf[i] < 0.0) throw DomainError("tabulated pdf: negative density");
      if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError("tabulated pdf: grid must be strictly increasing");
    }
    CouplingEnsemble e(DensityKind::tabulated, grid.front(), grid.back(), seed);
    double mass = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) mass += 0.5 * (pdf[i] + pdf[i - 1]) * (grid[i] - grid[i - 1]);
    if (!(mass > 0.0)) throw DomainError("tabulated pdf has zero mass");
    for (double& p : pdf) p /= mass;
    e.pdf_grid_ = std::move(grid);
    e.pdf_values_ = std::move(pdf);
    e.build_cdf_table();
    return e;
  }

  DensityKind density() const noexcept { return kind_; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  std::uint64_t seed() const noexcept { return seed_; }
  double mean_parameter() const noexcept { return mean_; }
  double sigma_parameter() const noexcept { return sigma_; }
  std::span<const double> pdf_grid() const noexcept { return pdf_grid_; }
  std::span<const double> pdf_values() const noexcept { return pdf_values_; }

  bool degenerate() const noexcept { return lower_ == upper_; }

  CouplingEnsemble with_seed(std::uint64_t seed) const {
    CouplingEnsemble e = *this;
    e.seed_ = seed;
    return e;
  }

  // Target CDF (exact for the built-ins, piecewise-quadratic for tabulated pdfs).
  double cdf(double a) const {
    if (a <= lower_) return degenerate() && a >= lower_ ? 1.0 : 0.0;
    if (a >= upper_) return 1.0;
    switch (kind_) {
      case DensityKind::uniform:
        return (a - lower_) / (upper_ - lower_);
      case DensityKind::truncated_gaussian: {
        const boost::math::normal_distribution<double> nd(mean_, sigma_);
        return (boost::math::cdf(nd, a) - cdf_lo_) / (cdf_hi_ - cdf_lo_);
      }
      case DensityKind::tabulated: {
        double acc = 0.0;
        for (std::size_t i = 1; i < pdf_grid_.size(); ++i) {
          const double x0 = pdf_grid_[i - 1], x1 = pdf_grid_[i];
          const double p0 = pdf_values_[i - 1], p1 = pdf_values_[i];
          if (a >= x1) {
            acc += 0.5 * (p0 + p1) * (x1 - x0);
            continue;
          }
          const double t = a - x0;
          const double slope = (p1 - p0) / (x1 - x0);
          acc += p0 * t + 0.5 * slope * t * t;
          break;
        }
        return std::clamp(acc, 0.0, 1.0);
      }
    }
    return 0.0;
  }

  double quantile(double u) const {
    if (degenerate()) return lower_;
    switch (kind_) {
      case DensityKind::uniform:
        return std::clamp(lower_ + u * (upper_ - lower_), lower_, upper_);
      case DensityKind::truncated_gaussian: {
        const boost::math::normal_distribution<double> nd(mean_, sigma_);
        const double p = std::clamp(cdf_lo_ + u * (cdf_hi_ - cdf_lo_), cdf_lo_, cdf_hi_);
        if (p <= 0.0) return lower_;
        if (p >= 1.0) return upper_;
        return std::clamp(boost::math::quantile(nd, p), lower_, upper_);
      }
      case DensityKind::tabulated: {
        // inverse CDF on the uniform table
        auto it = std::upper_bound(cdf_table_.begin(), cdf_table_.end(), u);
        if (it == cdf_table_.begin()) return lower_;
        if (it == cdf_table_.end()) return upper_;
        const std::size_t i = static_cast<std::size_t>(it - cdf_table_.begin());
        const double c0 = cdf_table_[i - 1], c1 = cdf_table_[i];
        const double h = (upper_ - lower_) / static_cast<double>(kCdfTableSize - 1);
        const double t = c1 > c0 ? (u - c0) / (c1 - c0) : 0.0;
        return std::clamp(lower_ + h * (static_cast<double>(i - 1) + t), lower_, upper_);
      }
    }
    return lower_;
  }

  double sample(std::uint64_t replica, std::uint64_t site) const {
    return quantile(detail::counter_uniform(seed_, replica, site));
  }

 private:
  CouplingEnsemble(DensityKind kind, double lower, double upper, std::uint64_t seed)
      : kind_(kind), lower_(lower), upper_(upper), seed_(seed) {
    if (!std::isfinite(lower) || !std::isfinite(upper) || lower > upper) {
      throw DomainError("coupling support must be a finite interval [lower, upper] with lower <= upper");
    }
  }

  void build_cdf_table() {
    cdf_table_.resize(kCdfTableSize);
    const double h = (upper_ - lower_) / static_cast<double>(kCdfTableSize - 1);
    for (std::size_t i = 0; i < kCdfTableSize; ++i) cdf_table_[i] = cdf(lower_ + h * static_cast<double>(i));
    cdf_table_.front() = 0.0;
    cdf_table_.back() = 1.0;
  }

  DensityKind kind_;
  double lower_;
  double upper_;
  std::uint64_t seed_;
  double mean_ = 0.0;
  double sigma_ = 0.0;
  double cdf_lo_ = 0.0;
  double cdf_hi_ = 1.0;
  std::vector<double> pdf_grid_;
  std::vector<double> pdf_values_;
  std::vector<double> cdf_table_;
};

inline double sample_coupling(const CouplingEnsemble& ens, std::uint64_t replica, std::uint64_t site) {
  return ens.sample(replica, site);
}

/// Placement of the scatterers. Unit layout puts site j at x = j; explicit layouts list the
/// site reference positions (where f(. - y_j) is centred).
class CellLayout {
 public:
  static CellLayout unit() { return CellLayout({}); }

  static CellLayout explicit_positions(std::vector<double> y) {
    if (y.empty()) throw DomainError("explicit layout needs at least one position");
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!std::isfinite(y[i])) throw DomainError("explicit layout: non-finite position");
      if (i > 0 && !(y[i] > y[i - 1])) throw DomainError("explicit layout: positions must be strictly increasing");
    }
    return CellLayout(std::move(y));
  }

  bool is_unit() const noexcept { return positions_.empty(); }
  std::span<const double> positions() const noexcept { return positions_; }

  double position(std::size_t site) const {
    if (is_unit()) return static_cast<double>(site);
    return positions_.at(site);
  }

  // Gap to the previous / next reference point; end sites reuse their only neighbour gap.
  double gap_before(std::size_t site) const {
    if (is_unit()) return 1.0;
    if (positions_.size() == 1) return 1.0;
    if (site == 0) return positions_[1] - positions_[0];
    return positions_[site] - positions_[site - 1];
  }
  double gap_after(std::size_t site, std::size_t n_sites) const {
    if (is_unit()) return 1.0;
    if (positions_.size() == 1) return 1.0;
    if (site + 1 >= n_sites) return positions_[site] - positions_[site - 1];
    return positions_[site + 1] - positions_[site];
  }

  // Length normalising per-site densities: sum over sites of (gap_before + gap_after) / 2.
  double chain_length(std::size_t n_sites) const {
    if (is_unit()) return static_cast<double>(n_sites);
    double len = 0.0;
    for (std::size_t j = 0; j < n_sites; ++j) len += 0.5 * (gap_before(j) + gap_after(j, n_sites));
    return len;
  }

  void check_supports(std::size_t n_sites, double support_width) const {
    if (is_unit()) {
      if (support_width > 1.0) throw DomainError("unit layout cannot host supports wider than 1");
      return;
    }
    if (n_sites > positions_.size()) {
      throw DomainError("explicit layout lists " + std::to_string(positions_.size()) +
                        " positions but the chain has " + std::to_string(n_sites) + " sites");
    }
    for (std::size_t j = 1; j < n_sites; ++j) {
      if (positions_[j] - positions_[j - 1] < support_width - 1e-12) {
        throw DomainError("explicit layout: neighbouring supports overlap at site " + std::to_string(j));
      }
    }
  }

 private:
  explicit CellLayout(std::vector<double> y) : positions_(std::move(y)) {}
  std::vector<double> positions_;
};

}  // namespace disorderlab
