#include "meshmarket/oracle.h"

#include <gtest/gtest.h>

#include <cmath>

#include "meshmarket/lam.h"
#include "meshmarket/prosumer.h"
#include "test_support.h"

namespace meshmarket {
namespace {

using testing::StandardTariff;

// Certification settings: rows held to 1e-10 of their scale so absolute
// residuals clear 1e-7 kW.
QpOptions Certify() {
  QpOptions o;
  o.tolerance = 1e-12;
  o.feasibility_tolerance = 1e-10;
  return o;
}

// Random point inside the variable box.
std::vector<double> RandomPoint(const QpProblem& problem, StreamRng& rng) {
  std::vector<double> z(problem.NumVariables());
  for (std::size_t j = 0; j < problem.prosumers.size(); ++j) {
    const ProsumerParams& p = problem.prosumers[j];
    z[3 * j] = rng.Uniform({p.gen_min, p.gen_max});
    z[3 * j + 1] = rng.Uniform({0.0, 30.0});
    z[3 * j + 2] = rng.Uniform({0.0, 30.0});
  }
  return z;
}

// Worst relative mismatch between QpGradient and central differences.
double GradientError(const QpProblem& problem, std::span<const double> z,
                     const AugmentedTerms* augmented) {
  std::vector<double> g(z.size());
  QpGradient(problem, z, g, augmented);
  std::vector<double> probe(z.begin(), z.end());
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t k = 0; k < z.size(); ++k) {
    probe[k] = z[k] + h;
    const double up = QpObjective(problem, probe, augmented);
    probe[k] = z[k] - h;
    const double down = QpObjective(problem, probe, augmented);
    probe[k] = z[k];
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g[k]) / std::max(1.0, std::abs(g[k])));
  }
  return worst;
}

TEST(QpGradientTest, MatchesFiniteDifferencesOnLamProblems) {
  StreamRng rng(41, 0);
  for (std::uint64_t k = 0; k < 5; ++k) {
    const testing::RandomLam lam = testing::MakeRandomLam(41, k, 5, 12);
    const QpProblem problem = BuildLamProblem(
        lam.members, StandardTariff(), lam.base_price, lam.elasticity);
    EXPECT_LE(GradientError(problem, RandomPoint(problem, rng), nullptr), 1e-5);
  }
}

TEST(QpGradientTest, MatchesFiniteDifferencesWithAugmentedRows) {
  const Scenario s = testing::DeskScenario();
  const QpProblem problem =
      BuildGlobalProblem(s, GlobalMode::kWithCompetitionLoss);
  AugmentedTerms terms;
  terms.penalty = 3.0;
  StreamRng rng(42, 0);
  for (std::size_t r = 0; r < problem.equalities.size(); ++r) {
    terms.eq_multipliers.push_back(rng.Uniform({-1.0, 1.0}));
    terms.eq_scale.push_back(rng.Uniform({10.0, 100.0}));
  }
  for (std::size_t r = 0; r < problem.inequalities.size(); ++r) {
    terms.ineq_multipliers.push_back(rng.Uniform({0.0, 1.0}));
    terms.ineq_scale.push_back(rng.Uniform({10.0, 100.0}));
  }
  EXPECT_LE(GradientError(problem, RandomPoint(problem, rng), &terms), 1e-5);
}

TEST(SolveLamQpTest, ForcedSelfSupplyCostsGeneration) {
  const std::vector<ProsumerParams> members{
      ProsumerParams::Make(0.001, 0.02, 10.0, 10.0, 10.0),
      ProsumerParams::Make(0.002, 0.03, 4.0, 4.0, 4.0)};
  const LamQpSolution o = SolveLamQp(members, StandardTariff(), 0.1, 0.001);
  ASSERT_TRUE(o.converged);
  for (const auto& d : o.decisions) EXPECT_NEAR(d.shared, 0.0, 1e-9);
  EXPECT_NEAR(o.system_cost, 0.05 + 0.2 + 0.016 + 0.12, 1e-9);
}

TEST(SolveLamQpTest, DerivedInstanceMatchesHandSolution) {
  const std::vector<ProsumerParams> members{testing::DerivedProsumer()};
  const LamQpSolution o =
      SolveLamQp(members, StandardTariff(), 0.1, 0.001, Certify());
  ASSERT_TRUE(o.converged);
  EXPECT_NEAR(o.decisions[0].generation, 40.0, 1e-6);
  EXPECT_NEAR(o.decisions[0].shared, 25.0, 1e-6);
  EXPECT_NEAR(o.decisions[0].sell, 5.0, 1e-6);
  EXPECT_NEAR(o.price, 0.075, 1e-9);
  EXPECT_NEAR(o.prosumer_cost, -0.925, 1e-6);
  EXPECT_NEAR(o.multipliers[0].shadow, 0.05, 1e-8);
}

TEST(SolveLamQpTest, HalvingToleranceBarelyMovesCost) {
  for (std::uint64_t k = 0; k < 5; ++k) {
    const testing::RandomLam lam = testing::MakeRandomLam(43, k);
    QpOptions loose;
    loose.tolerance = 1e-9;
    QpOptions tight = loose;
    tight.tolerance = 0.5e-9;
    const LamQpSolution a = SolveLamQp(lam.members, StandardTariff(),
                                       lam.base_price, lam.elasticity, loose);
    const LamQpSolution b = SolveLamQp(lam.members, StandardTariff(),
                                       lam.base_price, lam.elasticity, tight);
    ASSERT_TRUE(a.converged && b.converged);
    EXPECT_LE(std::abs(a.objective - b.objective),
              1e-8 * std::max(1.0, std::abs(b.objective)));
  }
}

TEST(SolveLamQpTest, KktResidualsSmall) {
  for (std::uint64_t k = 0; k < 5; ++k) {
    const testing::RandomLam lam = testing::MakeRandomLam(44, k);
    const QpProblem problem = BuildLamProblem(
        lam.members, StandardTariff(), lam.base_price, lam.elasticity);
    const QpSolution sol = SolveQp(problem);
    ASSERT_TRUE(sol.converged);
    EXPECT_LE(CheckQpKkt(problem, sol).Max(), 1e-7);
    for (double mu : sol.shadow) {
      EXPECT_GE(mu, 0.05 - 1e-9);
      EXPECT_LE(mu, 0.2 + 1e-9);
    }
  }
}

TEST(SolveLamQpTest, IterationCapFlagsNonConvergence) {
  const testing::RandomLam lam = testing::MakeRandomLam(45, 0, 30, 30);
  QpOptions options;
  options.max_iters = 3;
  EXPECT_FALSE(SolveLamQp(lam.members, StandardTariff(), lam.base_price,
                          lam.elasticity, options)
                   .converged);
}

// Two communities of forced self-suppliers on a three-bus feeder.
Scenario SelfBalancedScenario() {
  Scenario s;
  s.tariff = StandardTariff();
  s.topology = {3, {{1, 2}, {2, 3}}};
  for (int i = 0; i < 2; ++i) {
    Community c;
    c.id = i + 1;
    c.bus = i + 2;
    c.elasticity = 1e-3;
    c.members = {ProsumerParams::Make(0.001, 0.02, 10.0 + i, 10.0 + i, 10.0 + i),
                 ProsumerParams::Make(0.002, 0.01, 5.0, 5.0, 5.0)};
    s.communities.push_back(c);
  }
  s.monitored_lines.push_back({2, 3, 50.0});
  s.network.rows.push_back({"2-3:out", {0.0, 1.0}, 50.0});
  s.network.rows.push_back({"2-3:in", {0.0, -1.0}, 50.0});
  return s;
}

double OptOutTotal(const Scenario& s) {
  double total = 0.0;
  for (const auto& c : s.communities) {
    for (const auto& m : c.members) total += OptOutCost(m, s.tariff);
  }
  return total;
}

TEST(SolveGlobalQpTest, SelfBalancedScenarioHasNoSharing) {
  const Scenario s = SelfBalancedScenario();
  for (GlobalMode mode :
       {GlobalMode::kWithCompetitionLoss, GlobalMode::kSocialOptimum}) {
    const GlobalQpSolution o = SolveGlobalQp(s, mode);
    ASSERT_TRUE(o.converged);
    for (double y : o.uncleared) EXPECT_NEAR(y, 0.0, 1e-7);
    EXPECT_NEAR(o.system_cost, OptOutTotal(s), 1e-8);
  }
}

TEST(SolveGlobalQpTest, SocialOptimumNeverCostsMore) {
  const Scenario s = testing::DeskScenario();
  const GlobalQpSolution loss =
      SolveGlobalQp(s, GlobalMode::kWithCompetitionLoss, false, Certify());
  const GlobalQpSolution social =
      SolveGlobalQp(s, GlobalMode::kSocialOptimum, false, Certify());
  ASSERT_TRUE(loss.converged && social.converged);
  EXPECT_LE(social.system_cost, loss.system_cost + 1e-9);
  EXPECT_LE(loss.kkt.Max(), 1e-7);
  EXPECT_LE(social.kkt.Max(), 1e-7);
  for (double lambda : loss.row_multipliers) EXPECT_GE(lambda, 0.0);
}

TEST(SolveGlobalQpTest, ClearEachZeroesEveryCommunity) {
  const Scenario s = testing::DeskScenario();
  const GlobalQpSolution o =
      SolveGlobalQp(s, GlobalMode::kSocialOptimum, /*clear_each=*/true);
  ASSERT_TRUE(o.converged);
  for (double y : o.uncleared) EXPECT_LE(std::abs(y), 1e-6 * 100.0);
  EXPECT_TRUE(o.row_multipliers.empty());
}

TEST(RegimeCostsTest, SelfBalancedScenarioAllEqual) {
  const RegimeCosts r = ComputeRegimeCosts(SelfBalancedScenario());
  ASSERT_TRUE(r.converged);
  const double ss = r.self_sufficiency;
  for (double v : {r.local_sharing, r.local_optimum, r.wide_sharing,
                   r.wide_optimum}) {
    EXPECT_NEAR(v, ss, 1e-7 * std::abs(ss));
  }
  EXPECT_TRUE(RegimeOrderingHolds(r));
}

TEST(RegimeCostsTest, OrderingCheck) {
  RegimeCosts r;
  r.self_sufficiency = 10.0;
  r.local_sharing = 9.0;
  r.local_optimum = 9.0;
  r.wide_sharing = 8.0;
  r.wide_optimum = 7.0;
  EXPECT_TRUE(RegimeOrderingHolds(r));
  r.wide_optimum = 8.5;
  EXPECT_FALSE(RegimeOrderingHolds(r));
  r.wide_optimum = 8.0 * (1.0 + 0.5 * kRegimeOrderingSlack);
  EXPECT_TRUE(RegimeOrderingHolds(r));
}

}  // namespace
}  // namespace meshmarket
