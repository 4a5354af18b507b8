#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "disorderlab/estimators.hpp"
#include "disorderlab/thouless.hpp"
#include "oracles.hpp"

using namespace disorderlab;

namespace {

// smooth bump on [0, 10], zero beyond; the grid runs far enough that the tail fit sees only zeros
double bump(double e) { return e < 10.0 ? std::pow(std::sin(pi * e / 10.0), 2) : 0.0; }
double bump_prime(double e) { return e < 10.0 ? pi / 10.0 * std::sin(2.0 * pi * e / 10.0) : 0.0; }

SsdTable bump_table(double h) {
  std::vector<double> g, x;
  for (double e = 0.0; e <= 200.0 + 1e-9; e += h) {
    g.push_back(e);
    x.push_back(bump(e));
  }
  return SsdTable(g, x);
}

SsdTable zero_table() {
  std::vector<double> g, x;
  for (int i = 0; i <= 100; ++i) {
    g.push_back(0.5 * i);
    x.push_back(0.0);
  }
  return SsdTable(g, x);
}

SsdTable delta_model_table() {
  DisorderConfig c;
  c.ensemble = CouplingEnsemble::uniform(0.0, 1.0, 4);
  c.n_sites = 1000;
  c.replicas = 2;
  std::vector<double> grid;
  for (int i = 1; i <= 400; ++i) grid.push_back(0.3 * i);
  ScanSelection only_xi{false, false, true, false};
  const auto rows = scan(c, grid, only_xi);
  std::vector<double> g{0.0}, x{0.0};
  for (const auto& r : rows) {
    g.push_back(r.estimates.energy);
    x.push_back(r.estimates.ssd.value);
  }
  return SsdTable(g, x);
}

}  // namespace

TEST(SsdTable, Validation) {
  EXPECT_THROW(SsdTable({0.0}, {0.0}), DomainError);
  EXPECT_THROW(SsdTable({0.0, 1.0}, {0.0}), DomainError);
  EXPECT_THROW(SsdTable({1.0, 0.5}, {0.0, 0.0}), DomainError);
  EXPECT_THROW(SsdTable({0.0, 1.0}, {0.0, std::nan("")}), DomainError);
}

TEST(SsdTable, TailFitRecoversCoefficient) {
  std::vector<double> g, x;
  for (int i = 1; i <= 300; ++i) {
    g.push_back(0.5 * i);
    x.push_back(0.37 / std::sqrt(0.5 * i));
  }
  EXPECT_NEAR(SsdTable(g, x).tail_coefficient, 0.37, 1e-12);
}

TEST(Thouless, ZeroTable) {
  const auto t = zero_table();
  EXPECT_EQ(thouless_rhs(t, 10.0), 0.0);
  EXPECT_EQ(negative_energy_gamma(t, -4.0), 2.0);
  const auto r = stieltjes_w(t, cplx(3.0, 1.0));
  EXPECT_EQ(r.W, cplx(0.0, 0.0));
  EXPECT_NEAR(std::abs(r.w + std::sqrt(cplx(-3.0, -1.0))), 0.0, 1e-15);
}

TEST(Thouless, InteriorRequirement) {
  const auto t = zero_table();
  EXPECT_THROW(thouless_rhs(t, 0.5), DomainError);
  EXPECT_THROW(thouless_rhs(t, 49.5), DomainError);
  EXPECT_NO_THROW(thouless_rhs(t, 1.5));
  EXPECT_THROW(thouless_rhs(t, 60.0), DomainError);
}

TEST(Thouless, MatchesRefinedBruteForce) {
  const auto t = bump_table(0.05);
  for (double e : {1.0, 3.3, 5.0, 8.75, 12.0}) {
    const double ref = oracle::log_potential_bruteforce(bump_prime, 0.0, 10.0, e, 2000);
    EXPECT_NEAR(thouless_rhs(t, e), ref, 1e-3) << e;
  }
}

TEST(Thouless, RichardsonSelfCheck) {
  const auto coarse = bump_table(0.1), fine = bump_table(0.05);
  for (double e : {2.0, 5.0, 9.0}) EXPECT_LT(std::abs(thouless_rhs(coarse, e) - thouless_rhs(fine, e)), 4e-3);
}

TEST(Thouless, SingleBarrierTransmission) {
  // one square barrier: −log|T(E)| = −∫ log|E − E'| dξ(E')
  const double alpha = 2.0;
  std::vector<double> g, x;
  for (int i = 0; i < 2000; ++i) {
    const double u = i / 1999.0;
    const double e = 1e-5 + 400.0 * u * u;
    g.push_back(e);
    x.push_back(xi_single(alpha, e, SingleSitePotential::square()));
  }
  const SsdTable t(g, x);
  for (double e : {0.7, 2.0, 5.0, 20.0, 80.0}) {
    const double lhs = -std::log(s_matrix_square(alpha, e).abs_T);
    EXPECT_NEAR(thouless_rhs(t, e), lhs, 1e-2) << e;
  }
}

TEST(Stieltjes, RejectsLowerHalfPlane) {
  EXPECT_THROW(stieltjes_w(zero_table(), cplx(1.0, 0.0)), DomainError);
  EXPECT_THROW(stieltjes_w(zero_table(), cplx(1.0, -1.0)), DomainError);
}

TEST(Stieltjes, BoundaryValueIsSpectralShift) {
  const auto t = bump_table(0.01);
  for (double e : {2.0, 4.0, 6.5}) {
    const auto r = stieltjes_w(t, cplx(e, 1e-3));
    EXPECT_NEAR(r.W.imag(), -pi * bump(e), 0.01) << e;
  }
}

TEST(Stieltjes, NevanlinnaSweep) {
  const auto t = delta_model_table();
  double min_w = 1e300, max_big_w = -1e300;
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      const cplx z(0.1 + (100.0 - 0.1) * i / 19.0, 0.1 + (10.0 - 0.1) * j / 19.0);
      const auto r = stieltjes_w(t, z);
      min_w = std::min(min_w, r.w.imag());
      max_big_w = std::max(max_big_w, r.W.imag());
    }
  }
  EXPECT_GT(min_w, 0.0);
  EXPECT_LE(max_big_w, 0.0);
}

TEST(NegativeEnergy, Basics) {
  EXPECT_THROW(negative_energy_gamma(zero_table(), 1.0), DomainError);
  EXPECT_THROW(negative_energy_gamma(SsdTable({-1.0, 0.0, 1.0}, {0.0, 0.1, 0.0}), -2.0), DomainError);
}

TEST(NegativeEnergy, DeltaModel) {
  const auto t = delta_model_table();
  EXPECT_GT(negative_energy_gamma(t, -1.0), 1.0);
  // approach to E = 0 from both sides
  const double below = negative_energy_gamma(t, -1e-4);
  const double above = detail::log_potential(t, 1e-4) + free_gamma(1e-4);
  EXPECT_NEAR(below, above, 0.02);
  double prev = negative_energy_gamma(t, -2.0);
  for (double e = -1.9; e < 0.0; e += 0.1) {
    const double g = negative_energy_gamma(t, e);
    EXPECT_LT(g, prev);
    prev = g;
  }
}
