#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "disorderlab/chain.hpp"

using namespace disorderlab;

namespace {

double max_abs(const Mat2& m) { return m.cwiseAbs().maxCoeff(); }

SingleSitePotential tent() { return SingleSitePotential::tabulated({-0.5, 0.0, 0.5}, {0.0, 1.0, 0.0}); }

// sites at the given positions; end sites reuse their single neighbour gap
ChainProductState absorb_positions(const SingleSitePotential& f, const std::vector<double>& alpha,
                                   const std::vector<double>& y, double e) {
  ChainProductState st;
  const std::size_t n = y.size();
  for (std::size_t j = 0; j < n; ++j) {
    const double prev = j > 0 ? y[j - 1] : y[0] - (n > 1 ? y[1] - y[0] : 1.0);
    const double next = j + 1 < n ? y[j + 1] : y[j] + (n > 1 ? y[j] - y[j - 1] : 1.0);
    const auto sf = site_factor(alpha[j], f, e);
    st.absorb(tilt(sf.transfer, std::sqrt(e), 0.5 * (y[j] - prev), 0.5 * (next - y[j]), sf.phase));
  }
  return st;
}

}  // namespace

TEST(Tilted, FreeCellIsPurePhase) {
  const double e = 3.0, k = std::sqrt(e);
  const auto m = tilted_transfer(s_matrix_delta(0.0, e));
  EXPECT_LT(max_abs(m.entries - free_phase(k, 1.0)), 1e-15);
  EXPECT_NEAR(operator_norm(m.entries), 1.0, 1e-15);
  const auto g = tilted_transfer_general(s_matrix_delta(0.0, e), -0.3, 1.0, 3.5);
  EXPECT_NEAR(std::abs(g.entries(0, 1)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(g.entries(0, 0) - std::polar(1.0, -k * 1.9)), 0.0, 1e-14);
}

TEST(Tilted, DeltaSiteNorm) {
  const auto m = tilted_transfer(s_matrix_delta(2.0, 1.0));
  EXPECT_NEAR(std::abs(m.entries.determinant() - 1.0), 0.0, 1e-12);
  const double n = operator_norm(m.entries);
  EXPECT_NEAR(n * n, 3.0 + std::sqrt(8.0), 1e-12);
  const double t2 = 0.5, c = (2.0 - t2) / t2;
  EXPECT_NEAR(n * n, c + std::sqrt(c * c - 1.0), 1e-12);
}

TEST(Tilted, GeneralReducesToUnitSpacing) {
  for (double e : {0.5, 2.0, 30.0}) {
    const auto s = s_matrix_square(1.7, e);
    EXPECT_LT(max_abs(tilted_transfer_general(s, 2.0, 3.0, 4.0).entries - tilted_transfer(s).entries), 1e-12);
  }
  EXPECT_THROW(tilted_transfer_general(s_matrix_delta(1.0, 1.0), 1.0, 1.0, 2.0), DomainError);
  EXPECT_THROW(tilted_transfer_general(s_matrix_delta(1.0, 1.0), 0.0, 2.0, 1.0), DomainError);
}

TEST(Tilted, NormBoundAndStructure) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ua(-3.0, 5.0), ue(0.05, 60.0), ug(0.5, 1.5);
  for (int i = 0; i < 5000; ++i) {
    const double alpha = i % 50 == 0 ? 0.0 : ua(rng), e = ue(rng);
    const auto s = i % 2 ? s_matrix_delta(alpha, e) : s_matrix_square(alpha, e);
    const auto m = tilt(transfer_from_scattering(s).entries, s.sqrt_energy, ug(rng), ug(rng), std::nullopt);
    const double n = operator_norm(m.entries);
    ASSERT_NEAR(std::abs(m.entries.determinant() - 1.0), 0.0, 1e-10);
    ASSERT_LT(conjugate_structure_residual(m.entries), 1e-10 * max_abs(m.entries));
    ASSERT_GE(n, 1.0 - 1e-12);
    const bool unit = std::abs(n - 1.0) < 1e-10;
    ASSERT_EQ(unit, std::abs(s.R) < 1e-10) << alpha << " " << e;
  }
}

TEST(Absorb, FreeCells) {
  const double e = 2.5, k = std::sqrt(e);
  ChainProductState st;
  const auto m = tilted_transfer(s_matrix_delta(0.0, e), 0.0);
  for (int i = 0; i < 40; ++i) st.absorb(m);
  EXPECT_NEAR(st.log_norm(), 0.0, 1e-13);
  EXPECT_EQ(st.log_operator_norm(), 0.0);
  EXPECT_NEAR(st.arg_plus(), -40.0 * k, 1e-12);
  EXPECT_NEAR(st.arg_minus(), 40.0 * k, 1e-12);
  EXPECT_NEAR(st.arg_invT(), 0.0, 1e-12);
  EXPECT_EQ(st.site_count(), 40u);
  EXPECT_DOUBLE_EQ(st.length(), 40.0);
}

TEST(Absorb, MatchesUnrenormalizedProduct) {
  const double e = 2.0;
  const auto m = tilted_site(1.0, SingleSitePotential::delta(), e);
  ChainProductState st;
  Mat2 direct = Mat2::Identity();
  double prev_log = 0.0;
  for (int i = 0; i < 30; ++i) {
    st.absorb(m);
    direct = direct * m.entries;
    EXPECT_NEAR(st.unit_matrix().norm(), 1.0, 1e-12);
    EXPECT_GE(st.log_norm() - prev_log, -std::log(2.0));
    prev_log = st.log_norm();
  }
  EXPECT_LT(max_abs(st.product() - direct) / max_abs(direct), 1e-8);
}

TEST(Absorb, SingleSitePhaseIsSpectralShift) {
  ChainProductState a;
  a.absorb(tilted_site(2.0, SingleSitePotential::delta(), 1.0));
  EXPECT_NEAR(a.arg_invT(), pi * 0.25, 1e-14);
  for (double e : {0.3, 7.0, 60.0}) {
    ChainProductState b;
    b.absorb(tilted_site(3.0, SingleSitePotential::square(), e));
    EXPECT_NEAR(b.arg_invT(), pi * xi_single(3.0, e, SingleSitePotential::square()), 1e-9);
    EXPECT_NEAR(b.log_inv_abs_T(), -std::log(s_matrix_square(3.0, e).abs_T), 1e-12);
  }
}

TEST(Absorb, TrackersAgree) {
  // arg(1/T) of the chain and the e₊ phase differ exactly by the free propagation √E·length
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ua(0.0, 2.0);
  for (double e : {0.7, 4.0, 25.0}) {
    ChainProductState st;
    for (int i = 0; i < 200; ++i) st.absorb(tilted_site(ua(rng), SingleSitePotential::delta(), e));
    EXPECT_NEAR(st.arg_invT(), st.arg_plus() + std::sqrt(e) * st.length(), 1e-8);
  }
}

TEST(Absorb, UnwrapHazardIsReported) {
  const double k = 0.01;
  Mat2 core;
  core << std::polar(1.0, 3.0), 0.0, 0.0, std::polar(1.0, -3.0);
  ChainProductState st;
  try {
    st.absorb(tilt(core, k, 0.5, 0.5, std::nullopt));
    FAIL() << "expected an unwrap hazard";
  } catch (const UnwrapHazard& h) {
    EXPECT_EQ(h.site(), 0u);
  }
  ChainProductState ok;
  ok.absorb(tilt(core, k, 0.5, 0.5, 3.0));
  EXPECT_NEAR(ok.arg_invT(), 3.0, 1e-14);
}

TEST(Absorb, VariableSpacingMatchesDirectPropagation) {
  const std::vector<double> y{0.0, 1.0, 3.0};
  const std::vector<double> alpha{0.8, 1.5, 0.4};
  for (const auto& f : {SingleSitePotential::square(), tent()}) {
    for (double e : {0.6, 3.0, 12.0}) {
      const auto st = absorb_positions(f, alpha, y, e);
      std::vector<ChainCell> cells;
      for (std::size_t j = 0; j < y.size(); ++j) cells.push_back({alpha[j], y[j]});
      const Mat2 direct = chain_transfer_direct(f, cells, e, default_step(e) * 0.5).entries;
      EXPECT_LT(max_abs(st.untilted_product() - direct), 1e-8) << e;
      // the tilted product is the same operator seen between the outer half-gaps
      const double k = std::sqrt(e);
      const Mat2 tilted = free_phase(k, 0.5) * direct * free_phase(k, y.back() + 1.0);
      EXPECT_LT(max_abs(st.product() - tilted), 1e-8) << e;
    }
  }
}

TEST(ComposePair, FreePartner) {
  const auto s1 = s_matrix_delta(2.0, 1.0);
  const auto s2 = s_matrix_delta(0.0, 1.0);
  const auto p = compose_pair(s1, s2, 1.0);
  EXPECT_EQ(p.T_combined, s1.T);
  EXPECT_EQ(p.xi12, 0.0);
  EXPECT_THROW(compose_pair(s1, s_matrix_delta(2.0, 2.0), 1.0), DomainError);
}

TEST(ComposePair, DeltaPairBounds) {
  const auto s = s_matrix_delta(2.0, 1.0);
  const auto p = compose_pair(s, s, 1.0);
  EXPECT_GE(std::abs(p.T_combined), 0.25);
  double worst = 0.0;
  for (int i = 0; i <= 40; ++i) worst = std::max(worst, std::abs(compose_pair(s, s, 1.0 + 0.1 * i).xi12));
  EXPECT_LE(worst, 0.5);
  EXPECT_GT(worst, 0.0);
}

TEST(ComposePair, MatchesTwoSiteChain) {
  for (double e : {0.4, 2.0, 9.0}) {
    for (double d : {1.0, 1.7, 3.2}) {
      const auto f = SingleSitePotential::square();
      const auto s1 = s_matrix_square(1.3, e), s2 = s_matrix_square(-0.6, e);
      const auto p = compose_pair(s1, s2, d);
      const std::vector<ChainCell> cells{{1.3, 0.0}, {-0.6, d}};
      const auto lam = chain_transfer_product(f, cells, e);
      EXPECT_NEAR(std::abs(1.0 / lam.entries(0, 0) - p.T_combined), 0.0, 1e-12);
      const auto st = absorb_positions(f, {1.3, -0.6}, {0.0, d}, e);
      const double chain_defect = st.arg_invT() / pi - xi_single(1.3, e, f) - xi_single(-0.6, e, f);
      EXPECT_NEAR(chain_defect, p.xi12, 1e-8);
    }
  }
}

TEST(ComposePair, RandomBounds) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ua(-3.0, 6.0), ud(1.0, 5.0), ue(0.01, 100.0);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const double e = ue(rng), a1 = ua(rng), a2 = ua(rng), d = ud(rng);
    const auto s1 = i % 2 ? s_matrix_delta(a1, e) : s_matrix_square(a1, e);
    const auto s2 = i % 3 ? s_matrix_square(a2, e) : s_matrix_delta(a2, e);
    const auto p = compose_pair(s1, s2, d);
    if (std::abs(p.xi12) > 0.5) ++violations;
    if (std::abs(p.T_combined) < 0.5 * s1.abs_T * s2.abs_T) ++violations;
  }
  EXPECT_EQ(violations, 0);
}

TEST(DirectPropagation, Basics) {
  const std::vector<ChainCell> none;
  EXPECT_LT(max_abs(chain_transfer_direct(SingleSitePotential::square(), none, 2.0, 1e-3).entries -
                    Mat2::Identity()),
            0.0 + 1e-300);
  const std::vector<ChainCell> one{{1.2, 0.0}};
  const auto f = tent();
  EXPECT_LT(max_abs(chain_transfer_direct(f, one, 2.0, 1e-3).entries - propagate_U(f, 1.2, 0.0, 2.0, 1e-3).transfer.entries),
            1e-14);
  const std::vector<ChainCell> overlap{{1.0, 0.0}, {1.0, 0.5}};
  EXPECT_THROW(chain_transfer_direct(f, overlap, 2.0, 1e-3), DomainError);
  EXPECT_THROW(chain_transfer_direct(SingleSitePotential::delta(), one, 2.0, 1e-3), DomainError);
}

TEST(DirectPropagation, ThreeSquareCells) {
  const std::vector<ChainCell> cells{{0.5, 0.0}, {1.0, 1.0}, {0.7, 2.0}};
  const auto f = SingleSitePotential::square();
  const Mat2 d = chain_transfer_direct(f, cells, 2.0, default_step(2.0)).entries;
  const Mat2 p = chain_transfer_product(f, cells, 2.0).entries;
  EXPECT_LT(max_abs(d - p), 1e-7);
}

TEST(DirectPropagation, RandomChainsFactorize) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ua(-2.0, 4.0), ue(0.1, 40.0);
  std::uniform_int_distribution<int> un(1, 10), us(1, 2);
  const auto asym = SingleSitePotential::tabulated({-0.5, -0.2, 0.1, 0.5}, {0.2, 1.5, 0.0, 0.9});
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto& f = trial % 3 == 0 ? SingleSitePotential::square() : (trial % 3 == 1 ? tent() : asym);
    const double e = ue(rng);
    std::vector<ChainCell> cells;
    double y = 0.0;
    for (int j = 0, n = un(rng); j < n; ++j) {
      cells.push_back({ua(rng), y});
      y += us(rng);
    }
    const Mat2 d = chain_transfer_direct(f, cells, e, default_step(e)).entries;
    const Mat2 p = chain_transfer_product(f, cells, e).entries;
    worst = std::max(worst, max_abs(d - p));
  }
  EXPECT_LT(worst, 1e-7);
}

TEST(Frobenius, IdentityForChains) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> ua(-1.0, 3.0), ue(0.1, 30.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double e = ue(rng);
    std::vector<ChainCell> cells;
    for (int j = 0; j < 1 + trial % 8; ++j) cells.push_back({ua(rng), static_cast<double>(j)});
    const Mat2 lam = chain_transfer_product(SingleSitePotential::delta(), cells, e).entries;
    const double abs_t = 1.0 / std::abs(lam(0, 0));
    const double f2 = lam.squaredNorm();
    EXPECT_NEAR(f2 / transfer_frobenius_sq(abs_t), 1.0, 1e-8);
  }
  EXPECT_DOUBLE_EQ(transfer_frobenius_sq(1.0), 2.0);
}

TEST(TiltedNormForm, LowerBound) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u11(-1.0, 1.0), u01(0.0, 1.0), ue(0.01, 100.0);
  int violations = 0;
  for (int i = 0; i < 100000; ++i) {
    const double a = u11(rng), b = u11(rng), bb = u01(rng), e = ue(rng);
    if (tilted_norm_form(a, b, e, bb) < tilted_norm_floor(e) - 1e-12) ++violations;
  }
  EXPECT_EQ(violations, 0);
  EXPECT_DOUBLE_EQ(tilted_norm_floor(1.0), 2.0);
}
