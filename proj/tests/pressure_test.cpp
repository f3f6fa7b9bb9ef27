#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "scalepress/pressure.hpp"
#include "support.hpp"

using namespace scalepress;

namespace {

constexpr std::size_t A = 0, E = 1, C = 2, B = 3;
const double kE = std::exp(1.0);

FinitePatch box(std::int64_t n, int d = 1) { return folner_box(GroupModel::lattice(d), n); }

const ScaleFunction one = ScaleFunction::constant_one();

double scale_at(const ScaleFunction& s, double eps) { return s.is_constant_one() ? 1.0 : s.eval(eps); }

}  // namespace

// ------------------------------------------------------------- examples

TEST(SeparatedValue, SubshiftSingleSite) {
  const auto sys = build_periodic_subshift(2, 2);
  const auto v = separated_value(sys, box(1), 0.75, Potential::zero(sys), one);
  EXPECT_DOUBLE_EQ(v.value(), 2.0);
  EXPECT_TRUE(v.is_exact());
}

TEST(SeparatedValue, SubshiftTwoSites) {
  const auto sys = build_periodic_subshift(2, 2);
  EXPECT_DOUBLE_EQ(separated_value(sys, box(2), 0.75, Potential::zero(sys), one).value(), 4.0);
}

TEST(SeparatedValue, SymbolPotentialGivesEPlusOne) {
  const auto sys = build_periodic_subshift(2, 2);
  const auto v = separated_value(sys, box(1), 0.75, Potential::symbol_at_origin(sys), one);
  EXPECT_NEAR(v.value(), kE + 1, 1e-12);
  ASSERT_TRUE(v.witness.has_value());
  // e and b carry weight e; one representative per symbol class, lowest index first.
  EXPECT_EQ(*v.witness, (std::vector<std::size_t>{A, E}));
}

TEST(SeparatedValue, OnePoint) {
  const auto sys = build_one_point();
  for (double eps : {0.01, 0.5, 3.0}) EXPECT_DOUBLE_EQ(separated_value(sys, box(4), eps, Potential::zero(sys), one).value(), 1.0);
}

TEST(SpanningValue, SubshiftSingleSite) {
  const auto sys = build_periodic_subshift(2, 2);
  const auto v = spanning_value(sys, box(1), 0.75, Potential::zero(sys), one);
  EXPECT_DOUBLE_EQ(v.value(), 2.0);
  ASSERT_TRUE(v.witness.has_value());
  EXPECT_EQ(*v.witness, (std::vector<std::size_t>{A, E}));  // one point from {a,c} and one from {e,b}
}

TEST(SpanningValue, OnePointAndWideEps) {
  EXPECT_DOUBLE_EQ(spa_count(build_one_point(), box(3), 0.2).value(), 1.0);
  const auto sys = build_periodic_subshift(2, 2);
  EXPECT_DOUBLE_EQ(spanning_value(sys, box(1), 1.5, Potential::zero(sys), one).value(), 1.0);
}

TEST(Counts, SubshiftExamples) {
  const auto sys = build_periodic_subshift(2, 2);
  EXPECT_DOUBLE_EQ(sep_count(sys, box(1), 0.75).value(), 2.0);
  EXPECT_DOUBLE_EQ(spa_count(sys, box(1), 0.75).value(), 2.0);
  EXPECT_DOUBLE_EQ(sep_count(sys, box(2), 0.75).value(), 4.0);
  EXPECT_DOUBLE_EQ(spa_count(sys, box(2), 0.75).value(), 4.0);
  EXPECT_DOUBLE_EQ(sep_count(build_one_point(), box(1), 0.3).value(), 1.0);
}

TEST(CoverValues, OnePoint) {
  const auto sys = build_one_point();
  for (auto k : {CoverKind::Sup, CoverKind::Inf})
    EXPECT_DOUBLE_EQ(cover_values(sys, box(2), 0.4, Potential::zero(sys), one, k).value(), 1.0);
}

TEST(CoverValues, SubshiftThresholdClasses) {
  const auto sys = build_periodic_subshift(2, 2);
  for (auto k : {CoverKind::Sup, CoverKind::Inf})
    EXPECT_DOUBLE_EQ(cover_values(sys, box(1), 0.75, Potential::zero(sys), one, k).value(), 2.0);
  const auto phi = Potential::symbol_at_origin(sys);
  // Cells {a,c} (weights 1,1) and {b,e} (weights e,e): both sup and inf give 1 + e.
  EXPECT_NEAR(cover_values(sys, box(1), 0.75, phi, one, CoverKind::Inf).value(), 1 + kE, 1e-12);
  EXPECT_NEAR(cover_values(sys, box(1), 0.75, phi, one, CoverKind::Sup).value(), 1 + kE, 1e-12);
}

TEST(CellValues, NonPositiveEpsRejected) {
  const auto sys = build_rotation(3);
  EXPECT_THROW(separated_value(sys, box(1), 0.0, Potential::zero(sys), one), InvalidArgument);
  EXPECT_THROW(spanning_value(sys, box(1), -1.0, Potential::zero(sys), one), InvalidArgument);
}

TEST(CellValues, ExactModeAboveSizeCapSuggestsGreedy) {
  const auto sys = build_random(40, 9);
  solver::Options opt;
  opt.exact_size_cap = 20;
  opt.allow_fast_path = false;
  try {
    separated_value(sys, box(1), 0.3, Potential::zero(sys), one, opt);
    FAIL() << "expected SizeLimitError";
  } catch (const SizeLimitError& e) {
    EXPECT_NE(std::string(e.what()).find("greedy"), std::string::npos);
  }
  opt.mode = solver::Mode::Auto;
  const auto v = separated_value(sys, box(1), 0.3, Potential::zero(sys), one, opt);
  EXPECT_EQ(v.method, Method::Greedy);
  EXPECT_TRUE(v.invariants_hold());
}

TEST(CellValues, LogSpaceAvoidsOverflow) {
  const auto sys = build_rotation(5);
  const auto phi = Potential::constant(sys, 400.0);
  // exp(400 * 6) overflows a double; log-space bookkeeping keeps it exact.
  const auto v = separated_value(sys, box(6), 0.1, phi, one);
  EXPECT_NEAR(v.log_value(), 400.0 * 6 + std::log(5.0), 1e-9);
  EXPECT_TRUE(std::isinf(v.value()));
}

// ---------------------------------------------- exhaustive equivalence

TEST(OracleEquivalence, RandomSmallSystemsAllFourQuantities) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const auto sys = build_random(2 + rng() % 8, rng());
    const Potential phi{sptest::random_potential(sys.size(), rng)};
    const ScaleFunction s = trial % 2 ? ScaleFunction::neg_log() : one;
    const auto F = box(1 + static_cast<std::int64_t>(rng() % 3));
    const auto d = sptest::dF(sys, F);
    const auto S = sptest::sums(sys, phi.values, F);
    auto levels = sptest::distance_levels(d);
    std::vector<double> eps_list{0.07, 0.3, 0.55};
    if (!levels.empty()) eps_list.push_back(levels[rng() % levels.size()]);  // exact tie value
    for (double eps : eps_list) {
      if (eps >= 1) continue;
      const auto w = sptest::weights(S, scale_at(s, eps));
      const auto ctx = make_patch_context(sys, F, 0, phi);
      SCOPED_TRACE("trial " + std::to_string(trial) + " eps " + std::to_string(eps));
      EXPECT_NEAR(separated_value(*ctx.metric, ctx.sums, eps, s).value(), sptest::sep(d, w, eps), 1e-9 * sptest::sep(d, w, eps));
      EXPECT_NEAR(spanning_value(*ctx.metric, ctx.sums, eps, s).value(), sptest::spa(d, w, eps), 1e-9 * sptest::spa(d, w, eps));
      const double p = sptest::cover(d, w, eps, true), q = sptest::cover(d, w, eps, false);
      EXPECT_NEAR(cover_value(*ctx.metric, ctx.sums, eps, s, CoverKind::Sup).value(), p, 1e-9 * p);
      EXPECT_NEAR(cover_value(*ctx.metric, ctx.sums, eps, s, CoverKind::Inf).value(), q, 1e-9 * q);
      const std::vector<double> ones(sys.size(), 1.0);
      EXPECT_DOUBLE_EQ(sep_count(sys, F, eps).value(), sptest::sep(d, ones, eps));
      EXPECT_DOUBLE_EQ(spa_count(sys, F, eps).value(), sptest::spa(d, ones, eps));
    }
  }
}

// ------------------------------------------------------ cell inequalities

TEST(CellBounds, WeightedBelowMaxWeightTimesCount) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const auto sys = build_random(3 + rng() % 7, rng());
    const Potential phi{sptest::random_potential(sys.size(), rng)};
    const auto F = box(1 + static_cast<std::int64_t>(rng() % 3));
    for (double eps : {0.1, 0.25, 0.5}) {
      const auto S = sptest::sums(sys, phi.values, F);
      const double norm = *std::max_element(S.begin(), S.end());
      const auto Q = spanning_value(sys, F, eps, phi, one), P = separated_value(sys, F, eps, phi, one);
      EXPECT_LE(Q.log_value(), norm + spa_count(sys, F, eps).log_value() + 1e-9);
      EXPECT_LE(P.log_value(), norm + sep_count(sys, F, eps).log_value() + 1e-9);
      EXPECT_GT(Q.value(), 0.0);
    }
  }
}

TEST(CellBounds, ZeroPotentialEqualsCounts) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sys = build_random(2 + rng() % 9, rng());
    const auto F = box(1 + static_cast<std::int64_t>(rng() % 3));
    for (const auto& s : {one, ScaleFunction::neg_log()})
      for (double eps : {0.125, 0.2, 0.5}) {
        EXPECT_DOUBLE_EQ(spanning_value(sys, F, eps, Potential::zero(sys), s).value(), spa_count(sys, F, eps).value());
        EXPECT_DOUBLE_EQ(separated_value(sys, F, eps, Potential::zero(sys), s).value(), sep_count(sys, F, eps).value());
      }
  }
}

TEST(CellBounds, ChainAndCoverGapAwayFromTies) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const auto sys = build_random(2 + rng() % 9, rng());
    const Potential phi{sptest::random_potential(sys.size(), rng)};
    const ScaleFunction s = trial % 2 ? ScaleFunction::neg_log() : one;
    const auto F = box(1 + static_cast<std::int64_t>(rng() % 3));
    // Distances are multiples of 1/8, so these eps never coincide with one.
    for (double eps : {0.07, 0.19, 0.31, 0.69}) {
      const auto ctx = make_patch_context(sys, F, 0, phi);
      const double Q = spanning_value(*ctx.metric, ctx.sums, eps, s).log_value();
      const double P = separated_value(*ctx.metric, ctx.sums, eps, s).log_value();
      const double p = cover_value(*ctx.metric, ctx.sums, eps, s, CoverKind::Sup).log_value();
      const double q = cover_value(*ctx.metric, ctx.sums, eps, s, CoverKind::Inf).log_value();
      EXPECT_TRUE(log_le(Q, P)) << trial << " " << eps;
      EXPECT_TRUE(log_le(P, p)) << trial << " " << eps;
      EXPECT_TRUE(log_le(q, p));
      const double delta = phi.modulus(sys, eps);
      EXPECT_TRUE(log_le(p, static_cast<double>(F.size()) * delta * scale_at(s, eps) + q));
    }
  }
}

TEST(CellBounds, SpanningExceedsSeparatedAtExactTie) {
  // Two points at distance exactly eps: neither spans the other (needs d < eps)
  // and they are not separated (needs d > eps), so Q = w1 + w2 > P = max(w1, w2).
  const auto sys = build_rotation(2);
  const auto Q = spa_count(sys, box(1), 0.5), P = sep_count(sys, box(1), 0.5);
  EXPECT_DOUBLE_EQ(Q.value(), 2.0);
  EXPECT_DOUBLE_EQ(P.value(), 1.0);
}

TEST(Monotonicity, CountsInEpsAndPatch) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 15; ++trial) {
    const auto sys = build_random(3 + rng() % 8, rng());
    const std::vector<double> grid{0.05, 0.125, 0.2, 0.25, 0.4, 0.6};
    for (std::int64_t n = 1; n <= 3; ++n)
      for (std::size_t k = 1; k < grid.size(); ++k) {
        EXPECT_LE(sep_count(sys, box(n), grid[k]).value(), sep_count(sys, box(n), grid[k - 1]).value());
        EXPECT_LE(spa_count(sys, box(n), grid[k]).value(), spa_count(sys, box(n), grid[k - 1]).value());
        if (n > 1) {
          EXPECT_GE(sep_count(sys, box(n), grid[k]).value(), sep_count(sys, box(n - 1), grid[k]).value());
          EXPECT_GE(spa_count(sys, box(n), grid[k]).value(), spa_count(sys, box(n - 1), grid[k]).value());
        }
      }
  }
}

TEST(GreedySoundness, BracketsContainExactOptimum) {
  std::mt19937_64 rng(12);
  solver::Options greedy;
  greedy.mode = solver::Mode::Greedy;
  greedy.allow_fast_path = false;
  for (int trial = 0; trial < 30; ++trial) {
    const auto sys = build_random(4 + rng() % 9, rng());
    const Potential phi{sptest::random_potential(sys.size(), rng)};
    const auto ctx = make_patch_context(sys, box(1 + static_cast<std::int64_t>(rng() % 2)), 0, phi);
    for (double eps : {0.13, 0.3, 0.45})
      for (auto q : {Quantity::P, Quantity::Q, Quantity::p, Quantity::q}) {
        const auto ex = topological_cell(ctx, q, eps, one, {});
        const auto gr = topological_cell(ctx, q, eps, one, greedy);
        EXPECT_EQ(gr.method, Method::Greedy);
        EXPECT_TRUE(gr.invariants_hold());
        EXPECT_TRUE(log_le(gr.log_lower, ex.log_value())) << to_string(q);
        EXPECT_TRUE(log_le(ex.log_value(), gr.log_upper)) << to_string(q);
      }
  }
}

// ------------------------------------------------------------- profiles

TEST(Profile, OnePointAllZeroPerSite) {
  const auto sys = build_one_point();
  const auto prof = pressure_profile(sys, box_sequence(GroupModel::lattice(1), 4), {0.2, 0.5}, Potential::zero(sys),
                                     one, {Quantity::Q, Quantity::P, Quantity::p, Quantity::q});
  for (const auto& r : prof.rows) EXPECT_EQ(r.per_site, 0.0);
  EXPECT_EQ(scale_pressure_estimate(prof).sp, 0.0);
}

TEST(Profile, OnePointConstantPotential) {
  const auto sys = build_one_point();
  const double c = 0.8;
  const auto prof = pressure_profile(sys, box_sequence(GroupModel::lattice(1), 5), {0.1, 0.3},
                                     Potential::constant(sys, c), one, {Quantity::Q});
  for (const auto& r : prof.rows) EXPECT_NEAR(r.per_site, c, 1e-12);
  EXPECT_NEAR(scale_pressure_estimate(prof).sp, c, 1e-12);
}

TEST(Profile, FullShiftEntropyClosedForm) {
  const auto sys = build_periodic_subshift(2, 12);
  const auto prof = pressure_profile(sys, box_sequence(GroupModel::lattice(1), 8), {0.1}, Potential::zero(sys), one,
                                     {Quantity::sep, Quantity::spa});
  for (std::int64_t n = 1; n <= 8; ++n) {
    const double expected = (1.0 + 3.0 / static_cast<double>(n)) * std::log(2.0);
    EXPECT_NEAR(prof.find(Quantity::sep, n, 0.1)->per_site, expected, 1e-12);
    EXPECT_NEAR(prof.find(Quantity::spa, n, 0.1)->per_site, expected, 1e-12);
  }
}

TEST(Profile, FullShiftCountsByExhaustiveCheck) {
  // 2^{n+3} classes: points agreeing on their first n+3 symbols are within d_F <= 2^{-4} < 0.1.
  const auto sys = build_periodic_subshift(2, 6);
  for (std::int64_t n = 1; n <= 3; ++n) {
    const auto d = sptest::dF(sys, box(n));
    std::set<std::vector<int>> prefixes;
    for (std::size_t x = 0; x < sys.size(); ++x) {
      std::vector<int> pre;
      for (int i = 0; i < n + 3; ++i) pre.push_back(sys.words()[x][static_cast<std::size_t>(i % 6)]);
      prefixes.insert(pre);
      for (std::size_t y = 0; y < sys.size(); ++y)
        ASSERT_EQ(d[x][y] < 0.1, std::equal(pre.begin(), pre.end(), sys.words()[y].begin()) || x == y);
    }
    EXPECT_DOUBLE_EQ(sep_count(sys, box(n), 0.1).value(), static_cast<double>(prefixes.size()));
  }
}

TEST(Profile, RotationSepConstantInN) {
  const auto sys = build_rotation(8);
  const auto prof = pressure_profile(sys, box_sequence(GroupModel::lattice(1), 6), {0.05}, Potential::zero(sys), one,
                                     {Quantity::sep});
  double prev = 1e9;
  for (std::int64_t n = 1; n <= 6; ++n) {
    const double v = prof.find(Quantity::sep, n, 0.05)->per_site;
    EXPECT_NEAR(v, std::log(8.0) / static_cast<double>(n), 1e-12);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Profile, NegLogScaledValueEqualsCellClosedForm) {
  const auto sys = build_periodic_subshift(2, 12);
  const auto prof = pressure_profile(sys, box_sequence(GroupModel::lattice(1), 6), {0.1}, Potential::zero(sys),
                                     ScaleFunction::neg_log(), {Quantity::Q});
  for (const auto& r : prof.rows)
    EXPECT_NEAR(r.scaled, (1.0 + 3.0 / static_cast<double>(r.n)) * std::log(2.0) / -std::log(0.1), 1e-12);
}

TEST(Profile, RowsRecomputeFromCertifiedValues) {
  std::mt19937_64 rng(3);
  const auto sys = build_random(8, 4);
  const Potential phi{sptest::random_potential(sys.size(), rng)};
  const auto prof = pressure_profile(sys, box_sequence(GroupModel::lattice(1), 3), {0.2, 0.4}, phi,
                                     ScaleFunction::neg_log(), {Quantity::Q, Quantity::P, Quantity::p, Quantity::q});
  for (const auto& r : prof.rows) {
    EXPECT_NEAR(r.per_site, r.value.log_value() / static_cast<double>(r.patch_size), 1e-12);
    EXPECT_NEAR(r.scaled, r.per_site / -std::log(r.eps), 1e-12);
    EXPECT_TRUE(r.value.invariants_hold());
  }
}

TEST(Profile, CellErrorsNameTheCell) {
  const auto sys = build_random(30, 2);
  solver::Options opt;
  opt.exact_size_cap = 10;
  opt.allow_fast_path = false;
  try {
    pressure_profile(sys, box_sequence(GroupModel::lattice(1), 2), {0.3}, Potential::zero(sys), one, {Quantity::P}, opt);
    FAIL();
  } catch (const SizeLimitError& e) {
    EXPECT_NE(std::string(e.what()).find("quantity=P"), std::string::npos);
  }
}

TEST(Estimate, MissingQRejected) {
  const auto sys = build_rotation(3);
  const auto prof =
      pressure_profile(sys, box_sequence(GroupModel::lattice(1), 2), {0.2}, Potential::zero(sys), one, {Quantity::P});
  EXPECT_THROW(scale_pressure_estimate(prof), InvalidArgument);
}

TEST(Estimate, SurrogateOrderOnRandomProfiles) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 12; ++trial) {
    const auto sys = build_random(3 + rng() % 8, rng());
    const Potential phi{sptest::random_potential(sys.size(), rng, true)};
    const auto prof = pressure_profile(sys, box_sequence(GroupModel::lattice(1), 4), {0.07, 0.19, 0.31, 0.44}, phi,
                                       ScaleFunction::neg_log(),
                                       {Quantity::Q, Quantity::P, Quantity::p, Quantity::q});
    const auto order = surrogate_order(prof);
    EXPECT_TRUE(order.holds()) << "trial " << trial << ": Q=" << order.Q << " P=" << order.P << " p=" << order.p
                               << " q=" << order.q << " slack=" << order.slack;
  }
}

TEST(Estimate, ConvergenceDiagnosticsPresent) {
  const auto sys = build_rotation(8);
  const auto prof = pressure_profile(sys, box_sequence(GroupModel::lattice(1), 5), {0.05, 0.1}, Potential::zero(sys),
                                     one, {Quantity::Q, Quantity::P});
  const auto est = scale_pressure_estimate(prof);
  const auto& s = est.by_quantity.at(Quantity::Q);
  ASSERT_EQ(s.successive_differences.size(), 2u);
  EXPECT_EQ(s.successive_differences[0].size(), 4u);
  EXPECT_NEAR(s.limsup_n[0], std::log(8.0) / 3, 1e-12);  // trailing half n = 3..5, max at n = 3
  EXPECT_FALSE(est.note.empty());
}
