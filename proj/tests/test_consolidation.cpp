#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "pdt/consolidation.hpp"
#include "pdt/optimizer.hpp"
#include "test_util.hpp"

using namespace pdt;
using pdt::test::fourier_uv;
using pdt::test::reference_soil;

namespace {

SiteModel default_site() { return SiteModel{}; }

/// Numerical integral of 1/M(sigma) along the stress path.
double strain_by_quadrature(double s0, double sc, double M0, double ML, double ds) {
  const int n = 200000;
  const double h = ds / n;
  double e = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = s0 + (i + 0.5) * h;
    e += h / (s < sc ? M0 : ML);
  }
  return e;
}

/// Inverse of a monotone function on [0, hi] by plain bracketing.
template <class F>
double invert(const F& f, double y, double hi) {
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    (f(m) < y ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(VerticalDegree, Origin) {
  EXPECT_EQ(vertical_degree_from_time_factor(0.0), 0.0);
  EXPECT_EQ(vertical_degree(0.5, 7.75, 0.0), 0.0);
}

TEST(VerticalDegree, HalfConsolidationTimeFactor) {
  const double oracle = fourier_uv(0.197, 1000);
  const double u = vertical_degree_from_time_factor(0.197);
  EXPECT_NEAR(oracle, 0.5, 0.005);
  EXPECT_NEAR(u, oracle, 1e-9);
}

TEST(VerticalDegree, SmallTimeFactorBranchAgreesWithLongSeries) {
  for (double tv : {1e-4, 1e-3, 0.01, 0.03, 0.0499, 0.05, 0.08, 0.3, 1.0}) {
    const double oracle = fourier_uv(tv, 200000);
    EXPECT_NEAR(vertical_degree_from_time_factor(tv), oracle, 1e-8) << "tv=" << tv;
  }
}

TEST(VerticalDegree, ApproachesOne) {
  EXPECT_NEAR(vertical_degree_from_time_factor(10.0), 1.0, 1e-10);
  EXPECT_THROW(vertical_degree(-1.0, 7.75, 1.0), Error);
}

TEST(VerticalDegree, MonotoneInTime) {
  double prev = 0.0;
  for (int i = 1; i < 2000; ++i) {
    const double u = vertical_degree_from_time_factor(i * 1e-3);
    EXPECT_GE(u, prev);
    prev = u;
  }
}

TEST(HorizontalDegree, OriginAndHalfTime) {
  PvdDesign pvd;
  EXPECT_EQ(horizontal_degree(1.5, pvd, 0.0), 0.0);
  const double de = pvd.influence_diameter();
  const double mu = hansbo_mu(de / pvd.drain_diameter_m);
  const double th = mu * std::numbers::ln2 / 8.0;
  const double t_week = th * de * de / 1.5 * kWeeksPerYear;
  EXPECT_NEAR(horizontal_degree(1.5, pvd, t_week), 0.5, 1e-14);
}

TEST(HorizontalDegree, SpacingFactorTwoWays) {
  PvdDesign pvd;
  const double n = pvd.influence_diameter() / pvd.drain_diameter_m;
  EXPECT_NEAR(n, 1.13 * 1.2 / 0.066, 1e-12);
  EXPECT_NEAR(n, 20.545454545, 1e-8);
  EXPECT_NEAR(hansbo_mu(n), pdt::test::mu_alt(n), 1e-12);
  for (double x : {1.5, 3.0, 50.0}) EXPECT_NEAR(hansbo_mu(x), pdt::test::mu_alt(x), 1e-12);
  pvd.pattern = DrainPattern::triangular;
  EXPECT_NEAR(pvd.influence_diameter(), 1.05 * 1.2, 1e-15);
}

TEST(HorizontalDegree, SpacingBelowDiameterIsInvalidGeometry) {
  PvdDesign pvd;
  pvd.spacing_m = 0.05;
  try {
    pvd.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_geometry);
  }
  EXPECT_THROW(hansbo_mu(1.0), Error);
  EXPECT_THROW(hansbo_mu(0.5), Error);
}

TEST(CombinedDegree, Values) {
  EXPECT_EQ(combined_degree(0.0, 0.0), 0.0);
  EXPECT_EQ(combined_degree(1.0, 0.3), 1.0);
  EXPECT_EQ(combined_degree(0.3, 1.0), 1.0);
  EXPECT_EQ(combined_degree(0.5, 0.5), 0.75);
  for (double a = 0.0; a <= 1.0; a += 0.05)
    for (double b = 0.0; b <= 1.0; b += 0.05) {
      EXPECT_EQ(combined_degree(a, b), combined_degree(b, a));
      EXPECT_GE(combined_degree(a, b), std::max(a, b) - 1e-15);
    }
}

TEST(StrainIncrement, Branches) {
  EXPECT_EQ(strain_increment(50, 80, 200, 10000, 1000, 0), 0.0);
  EXPECT_NEAR(strain_increment(50, 80, 200, 10000, 1000, 20), 0.002, 1e-15);
  EXPECT_NEAR(strain_increment(50, 60, 200, 10000, 1000, 30), 0.021, 1e-15);
  EXPECT_NEAR(strain_by_quadrature(50, 60, 10000, 1000, 30), 0.021, 1e-6);
  // normally consolidated start
  EXPECT_NEAR(strain_increment(70, 60, 200, 10000, 1000, 30), 0.03, 1e-15);
}

TEST(StrainIncrement, MatchesQuadratureOnGrid) {
  for (double s0 : {10.0, 40.0, 75.0})
    for (double ds : {1.0, 25.0, 90.0}) {
      const double e = strain_increment(s0, 60, 200, 3000, 400, ds);
      EXPECT_NEAR(e, strain_by_quadrature(s0, 60, 3000, 400, ds), 1e-6);
    }
}

TEST(StrainIncrement, BeyondLimitStress) {
  try {
    strain_increment(50, 60, 100, 10000, 1000, 60);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::stress_range_exceeded);
  }
}

TEST(LongTermSettlement, ZeroLoad) { EXPECT_EQ(long_term_settlement(reference_soil(), {}, 0.0), 0.0); }

TEST(LongTermSettlement, SingleLayerHandCalculation) {
  EmbankmentGeometry g;
  g.n_layers = 1;
  SoilSample s = reference_soil();
  // choose gamma_cl so the mid-depth effective stress is 50 kPa
  const double mid = clay_mid_depth(g);
  s.gamma_cl = (50.0 + g.gamma_w * (mid - g.groundwater_depth_m)) / mid;
  s.sigma_c = 60.0;
  s.sigma_L = 200.0;
  s.M0 = 10000.0;
  s.ML = 1000.0;
  EXPECT_NEAR(initial_effective_stress(g, s.gamma_cl, mid), 50.0, 1e-12);
  EXPECT_NEAR(long_term_settlement(s, g, 30.0), 0.3255, 1e-12);
}

TEST(LongTermSettlement, LayerRefinementConverges) {
  EmbankmentGeometry g32, g64;
  g32.n_layers = 32;
  g64.n_layers = 64;
  const auto& sc = pdt::test::bundled();
  const auto soils = sample_soil(sc.priors(), 3, 20, sc.problem().admissibility());
  for (const auto& s : soils) {
    const double a = long_term_settlement(s, g32, 40.0);
    const double b = long_term_settlement(s, g64, 40.0);
    EXPECT_LT(std::abs(a - b), 0.01 * b);
  }
}

TEST(LongTermSettlement, ReportsLayerOnOverload) {
  SoilSample s = reference_soil();
  s.sigma_L = 90.0;
  try {
    long_term_settlement(s, {}, 60.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::stress_range_exceeded);
    EXPECT_NE(std::string(e.what()).find("layer"), std::string::npos);
  }
}

TEST(TotalLoad, Cases) {
  SoilSample s = reference_soil();
  EmbankmentGeometry g;
  ActionSchedule none{0.0, std::nullopt, 0.0};
  for (double t : {0.0, 10.0, 100.0}) EXPECT_NEAR(total_load(none, s, g, t), 24.96, 1e-12);
  ActionSchedule inc{1.0, 20.0, 0.5};
  EXPECT_NEAR(total_load(inc, s, g, 19.999), 20.8 * 2.2, 1e-12);
  EXPECT_NEAR(total_load(inc, s, g, 20.0), 20.8 * 2.7, 1e-12);
}

TEST(TShift, NoLoadChange) {
  const DegreeModel u(reference_soil(), default_site());
  EXPECT_EQ(compute_t_shift(u, 0.8, 0.8, 20.0), 0.0);
}

TEST(TShift, DoublingOracle) {
  const SiteModel site = default_site();
  const DegreeModel u(reference_soil(), site);
  const double t_add = invert(u, 0.6, 500.0);
  ASSERT_NEAR(u(t_add), 0.6, 1e-9);
  const double expected = t_add - invert(u, 0.3, t_add);
  EXPECT_NEAR(compute_t_shift(u, 1.0, 2.0, t_add), expected, 1e-8);
}

TEST(TShift, DecreasingLoadIsUnsolvable) {
  const DegreeModel u(reference_soil(), default_site());
  try {
    compute_t_shift(u, 1.0, 0.5, 10.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::continuity_unsolvable);
  }
}

TEST(Response, ContinuityAtIncrementAcrossSeeds) {
  const auto& sc = pdt::test::bundled();
  const auto& p = sc.problem();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng = make_stream(seed, "continuity");
    const SoilSample s = sample_soil(p.priors, rng, 1, p.admissibility()).front();
    const double t_add = 1.0 + static_cast<double>(seed % 60);
    const double h = 0.1 + 0.1 * static_cast<double>(seed % 30);
    ConsolidationResponse base(s, *p.site, {1.0, std::nullopt, 0.0});
    auto r = base.with_increment(*p.site, t_add, h);
    const double before = base.settlement(t_add);
    const double after = r.settlement(t_add);
    EXPECT_LE(std::abs(after - before), 1e-6 * before) << "seed " << seed;
    EXPECT_GE(r.t_shift(), 0.0);
    // the increment never lowers settlement afterwards
    for (double t = t_add; t <= 120.0; t += 7.0) EXPECT_GE(r.settlement(t), base.settlement(t) * (1.0 - 1e-9));
  }
}

TEST(Trajectory, InitialState) {
  const auto tr = simulate_trajectory(reference_soil(), default_site(), {1.0, std::nullopt, 0.0}, 72);
  EXPECT_EQ(tr.settlement_m[0], 0.0);
  EXPECT_EQ(tr.degree[0], 0.0);
  EXPECT_EQ(tr.ocr[0], 1.0);
  EXPECT_EQ(tr.t_max(), 72);
}

TEST(Trajectory, ApproachesLongTermSettlement) {
  const SiteModel site = default_site();
  const ActionSchedule sch{1.0, std::nullopt, 0.0};
  ConsolidationResponse r(reference_soil(), site, sch);
  const double sinf = long_term_settlement(reference_soil(), site.geometry, 20.8 * 2.2);
  EXPECT_NEAR(r.settlement(5000.0), sinf, 0.01 * sinf);
}

TEST(Trajectory, Invariants) {
  const auto& sc = pdt::test::bundled();
  const auto& p = sc.problem();
  const auto soils = sample_soil(p.priors, 17, 40, p.admissibility());
  for (std::size_t i = 0; i < soils.size(); ++i) {
    const ActionSchedule sch = i % 2 ? ActionSchedule{1.0, 25.0, 0.8} : ActionSchedule{0.5, std::nullopt, 0.0};
    const auto tr = simulate_trajectory(soils[i], *p.site, sch, 72);
    for (std::size_t w = 1; w < tr.week.size(); ++w) {
      EXPECT_GE(tr.settlement_m[w], tr.settlement_m[w - 1] - 1e-12);
      EXPECT_GE(tr.degree[w], 0.0);
      EXPECT_LE(tr.degree[w], 1.0);
      EXPECT_GE(tr.ocr[w], 1.0);
      EXPECT_LE(tr.settlement_m[w], tr.s_inf_m[w] + 1e-12);
    }
  }
}

TEST(Trajectory, MoreSurchargeSettlesMore) {
  const SiteModel site = default_site();
  ConsolidationResponse lo(reference_soil(), site, {0.5, std::nullopt, 0.0});
  ConsolidationResponse hi(reference_soil(), site, {1.5, std::nullopt, 0.0});
  for (double t = 1; t <= 72; t += 1) {
    EXPECT_GE(hi.settlement(t), lo.settlement(t));
    EXPECT_GE(hi.ocr(t), lo.ocr(t));
  }
}

TEST(Trajectory, OcrFallsWithPermanentLoad) {
  SiteModel a = default_site(), b = default_site();
  b.geometry.embankment_height_m = 1.6;
  ConsolidationResponse ra(reference_soil(), a, {1.0, std::nullopt, 0.0});
  ConsolidationResponse rb(reference_soil(), b, {1.0, std::nullopt, 0.0});
  for (double t = 1; t <= 72; t += 5) EXPECT_LE(rb.ocr(t), ra.ocr(t));
  auto rc = ra.with_increment(a, 10.0, 0.5);
  for (double t = 10; t <= 72; t += 5) EXPECT_GE(rc.ocr(t), ra.ocr(t));
}

TEST(Trajectory, IndependentSingleLayerOracle) {
  SiteModel site = default_site();
  site.geometry.n_layers = 1;
  const SoilSample s = reference_soil();
  const auto tr = simulate_trajectory(s, site, {1.0, std::nullopt, 0.0}, 72);
  const auto& g = site.geometry;
  const double mid = g.crust_thickness_m + g.clay_thickness_m / 2;
  const double s0 = s.gamma_cl * mid - g.gamma_w * (mid - g.groundwater_depth_m);
  const double load = s.gamma_emb * (g.embankment_height_m + 1.0);
  // part of the path above the preconsolidation pressure goes on ML
  const double soft = std::max(0.0, s0 + load - std::max(s0, s.sigma_c));
  const double sinf = g.clay_thickness_m * ((load - soft) / s.M0 + soft / s.ML);
  const double de = 1.13 * 1.2;
  const double n = de / 0.066;
  const double mu = pdt::test::mu_alt(n);
  for (int w = 1; w <= 72; ++w) {
    const double years = w / 52.0;
    const double uv = fourier_uv(s.cv * years / (7.75 * 7.75), 20000);
    const double uh = 1.0 - std::exp(-8.0 * s.ch * years / (de * de) / mu);
    const double u = 1.0 - (1.0 - uv) * (1.0 - uh);
    EXPECT_NEAR(tr.settlement_m[static_cast<std::size_t>(w)], u * sinf, 1e-7) << "week " << w;
  }
  EXPECT_NEAR(tr.s_inf_m.back(), sinf, 1e-12);
}

TEST(Trajectory, IncrementCanRescueCompliance) {
  const auto& sc = pdt::test::bundled();
  const auto& p = sc.problem();
  const double target = p.requirements.s_target_m;
  const int tm = p.requirements.t_max_week;
  bool found = false;
  for (std::uint64_t seed = 0; seed < 200 && !found; ++seed) {
    Rng rng = make_stream(seed, "rescue");
    const SoilSample s = sample_soil(p.priors, rng, 1, p.admissibility()).front();
    ConsolidationResponse base(s, *p.site, {1.0, std::nullopt, 0.0});
    if (base.settlement(tm) >= target) continue;
    auto adj = base.with_increment(*p.site, 20.0, 1.5);
    found = adj.settlement(tm) >= target;
  }
  EXPECT_TRUE(found);
}

TEST(Trajectory, ScheduleValidation) {
  EXPECT_THROW(simulate_trajectory(reference_soil(), default_site(), {1.0, 0.5, 0.3}, 72), Error);
  EXPECT_THROW(simulate_trajectory(reference_soil(), default_site(), {1.0, 80.0, 0.3}, 72), Error);
  EXPECT_THROW(simulate_trajectory(reference_soil(), default_site(), {-1.0, std::nullopt, 0.0}, 72), Error);
  ConsolidationResponse r(reference_soil(), default_site(), {1.0, 10.0, 0.3});
  try {
    r.with_increment(default_site(), 20.0, 0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unsupported_action);
  }
}
