// Acceptance suite: one PASS/FAIL line per criterion, every tolerance pinned
// below. Exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "meshmarket/lam.h"
#include "meshmarket/oracle.h"
#include "meshmarket/parallel.h"
#include "meshmarket/prosumer.h"
#include "meshmarket/scenario.h"
#include "meshmarket/wam.h"
#include "test_support.h"

namespace meshmarket {
namespace {

using Clock = std::chrono::steady_clock;
using testing::StandardTariff;

double SecondsSince(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Best response.
constexpr int kBestResponseInstances = 1000;
constexpr double kGridStep = 1e-3;
constexpr double kGridObjectiveSlack = 1e-4;
constexpr double kComplementarity = 1e-12;
constexpr double kBestResponseMeanSeconds = 5e-6;

// Local market.
constexpr int kLamInstances = 100;
constexpr double kLamTolerance = 1e-12;
constexpr double kOracleTolerance = 1e-12;
constexpr double kOracleFeasibility = 1e-10;
constexpr double kCostGap = 1e-6;
constexpr double kVariableGap = 1e-5;
constexpr double kInitGap = 1e-5;
constexpr double kIdentityResidual = 1e-8;
constexpr double kBandSlack = 1e-9;
constexpr double kOutOfBandBase = 0.5;
constexpr int kOutOfBandMembers = 200;
// The large-N bound is attained when every member buys, so only round-off
// headroom is added on top of it.
constexpr double kOutOfBandRoundOff = 1e-9;
constexpr double kRationalitySlack = 1e-9;
constexpr int kBidCurveLams = 20;
constexpr int kBidCurvePoints = 50;
constexpr double kBidCurveLo = 0.0;
constexpr double kBidCurveHi = 0.3;
constexpr double kBidCurveLamTolerance = 1e-13;
constexpr double kBidCurveDrop = 1e-8;

// Wide-area market.
constexpr double kWamCostGap = 1e-4;
constexpr int kDeskMaxIters = 2000;
constexpr double kBalanceFraction = 1e-3;
constexpr double kRowFraction = 1e-6;
constexpr double kBindingMultiplier = 1e-6;
constexpr double kDeskSeconds = 30.0;
constexpr double kOrderingSlack = 0.0;
constexpr double kLocalGap = 0.02;
constexpr int kFullScaleIters = 500;
constexpr double kFullScaleLamTolerance = 1e-8;
constexpr double kFullScaleSeconds = 60.0;
constexpr double kMeanLamIterations = 60.0;
constexpr double kSecondsPerProsumer = 5e-3;

// Numerical hygiene.
constexpr int kGradientPoints = 100;
constexpr double kFiniteStep = 1e-6;
constexpr double kGradientGap = 1e-5;
constexpr double kKktResidual = 1e-7;

constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double MaxDeviation(const ProsumerDecision& a, const ProsumerDecision& b) {
  return std::max({std::abs(a.generation - b.generation),
                   std::abs(a.buy - b.buy), std::abs(a.sell - b.sell),
                   std::abs(a.shared - b.shared)});
}

LamConfig LamSettings(double base, double a, double tolerance) {
  LamConfig c = LamConfig::Make(base, a);
  c.tolerance = tolerance;
  c.max_iters = 1'000'000;
  return c;
}

QpOptions Certify() {
  QpOptions o;
  o.tolerance = kOracleTolerance;
  o.feasibility_tolerance = kOracleFeasibility;
  return o;
}

// Every converged local clearing produced by the suite, for the identity,
// rationality and KKT checks that apply to all of them.
struct ClearedLam {
  std::vector<ProsumerParams> members;
  LamConfig config;
  LamResult result;
};

struct Shared {
  std::vector<ClearedLam> lams;
  double worst_lam_kkt = 0.0;
  double worst_oracle_kkt = 0.0;
  Scenario desk;
  Scenario full;
};

Outcome BestResponseExactness() {
  StreamRng rng(kSeed, 1);
  const UtilityTariff t = StandardTariff();
  std::vector<ProsumerParams> params;
  std::vector<PriceSignal> signals;
  double worst_excess = -1e300;
  double worst_comp = 0.0;
  for (int k = 0; k < kBestResponseInstances; ++k) {
    params.push_back(testing::RandomProsumer(rng));
    signals.push_back({rng.Uniform({0.0, 0.3}), rng.Uniform({1e-4, 1e-2})});
    const BestResponse br = SolveBestResponse(params.back(), t, signals.back());
    const ProsumerDecision grid =
        BruteForceBestResponse(params.back(), t, signals.back(), kGridStep);
    const double closed =
        BestResponseObjective(params.back(), t, signals.back(), br.decision);
    const double oracle =
        BestResponseObjective(params.back(), t, signals.back(), grid);
    worst_excess = std::max(worst_excess, closed - oracle);
    worst_comp = std::max(worst_comp, br.decision.buy * br.decision.sell);
  }

  constexpr int kRepeats = 1000;
  double sink = 0.0;
  const auto t0 = Clock::now();
  for (int r = 0; r < kRepeats; ++r) {
    for (int k = 0; k < kBestResponseInstances; ++k) {
      sink += SolveBestResponse(params[k], t, signals[k]).decision.shared;
    }
  }
  const double mean = SecondsSince(t0) / (kRepeats * kBestResponseInstances);
  const bool pass = worst_excess <= kGridObjectiveSlack &&
                    worst_comp <= kComplementarity &&
                    mean <= kBestResponseMeanSeconds && std::isfinite(sink);
  return {pass, Format("closed - grid objective max %.3e (<= %.0e), "
                       "max buy*sell %.3e (<= %.0e), mean %.3f us (<= %.0f us)",
                       worst_excess, kGridObjectiveSlack, worst_comp,
                       kComplementarity, mean * 1e6,
                       kBestResponseMeanSeconds * 1e6)};
}

Outcome LamOracleEquivalence(Shared& shared) {
  const UtilityTariff t = StandardTariff();
  double cost_gap = 0.0, var_gap = 0.0, init_gap = 0.0;
  int failures = 0;
  for (int k = 0; k < kLamInstances; ++k) {
    const testing::RandomLam lam = testing::MakeRandomLam(kSeed, 100 + k);
    const LamConfig config =
        LamSettings(lam.base_price, lam.elasticity, kLamTolerance);
    const LamResult r = ClearLam(lam.members, t, config);

    StreamRng rng(kSeed, 10'000 + k);
    LamStart start;
    for (const auto& p : lam.members) {
      const double gen = rng.Uniform({p.gen_min, p.gen_max});
      const double x = rng.Uniform({-30.0, 30.0});
      const double net = gen - p.demand - x;
      start.decisions.push_back(
          {gen, std::max(0.0, -net), std::max(0.0, net), x});
    }
    const LamResult other = ClearLam(lam.members, t, config, &start);

    const QpProblem problem =
        BuildLamProblem(lam.members, t, lam.base_price, lam.elasticity);
    const QpSolution qp = SolveQp(problem, Certify());
    const LamQpSolution o = SolveLamQp(lam.members, t, lam.base_price,
                                       lam.elasticity, Certify());
    if (!r.converged || !other.converged || !o.converged || !qp.converged) {
      ++failures;
      continue;
    }
    shared.worst_oracle_kkt =
        std::max(shared.worst_oracle_kkt, CheckQpKkt(problem, qp).Max());

    double cost = 0.0;
    for (std::size_t j = 0; j < lam.members.size(); ++j) {
      cost += ProsumerCost(lam.members[j], t, r.decisions[j], r.price);
      var_gap = std::max(var_gap, MaxDeviation(r.decisions[j], o.decisions[j]));
      init_gap =
          std::max(init_gap, MaxDeviation(r.decisions[j], other.decisions[j]));
    }
    cost_gap = std::max(cost_gap, std::abs(cost - o.prosumer_cost) /
                                      std::max(1.0, std::abs(o.prosumer_cost)));
    shared.lams.push_back({lam.members, config, r});
    shared.lams.push_back({lam.members, config, other});
  }
  const bool pass = failures == 0 && cost_gap <= kCostGap &&
                    var_gap <= kVariableGap && init_gap <= kInitGap;
  return {pass, Format("%d LAMs, %d unconverged; relative cost gap %.3e "
                       "(<= %.0e), variable gap %.3e kW (<= %.0e), init gap "
                       "%.3e kW (<= %.0e)",
                       kLamInstances, failures, cost_gap, kCostGap, var_gap,
                       kVariableGap, init_gap, kInitGap)};
}

Outcome EquilibriumIdentities(Shared& shared) {
  const UtilityTariff t = StandardTariff();
  double identity = 0.0, band = 0.0;
  for (const ClearedLam& c : shared.lams) {
    const EquilibriumReport rep =
        CheckEquilibrium(c.members, t, c.config, c.result);
    identity = std::max({identity, rep.shared_identity, rep.price_average,
                         rep.price_identity});
    band = std::max(band, rep.shadow_band);
    if (rep.price_band_applies) band = std::max(band, rep.price_band);
    shared.worst_lam_kkt = std::max(shared.worst_lam_kkt, rep.MaxKkt());
  }

  StreamRng rng(kSeed, 2);
  std::vector<ProsumerParams> members;
  for (int j = 0; j < kOutOfBandMembers; ++j) {
    members.push_back(testing::RandomProsumer(rng));
  }
  const LamConfig config = LamSettings(
      kOutOfBandBase, rng.Uniform({2.5e-3, 5e-3}) / kOutOfBandMembers,
      kLamTolerance);
  const LamResult r = ClearLam(members, t, config);
  const double slack = (kOutOfBandBase - t.buy_price) / (kOutOfBandMembers + 1);
  const double excess = std::max(t.sell_price - r.price, r.price - t.buy_price);
  shared.lams.push_back({members, config, r});

  const bool pass = identity <= kIdentityResidual && band <= kBandSlack &&
                    r.converged && excess <= slack + kOutOfBandRoundOff;
  return {pass, Format("%zu LAMs: identity residual %.3e (<= %.0e), band "
                       "excursion %.3e (<= %.0e); base %.1f with %d members: "
                       "price %.9f, excursion beyond the (%.1f-%.1f)/%d bound %.3e "
                       "(<= %.0e)",
                       shared.lams.size() - 1, identity, kIdentityResidual, band,
                       kBandSlack, kOutOfBandBase, kOutOfBandMembers, r.price,
                       kOutOfBandBase, t.buy_price, kOutOfBandMembers + 1,
                       excess - slack, kOutOfBandRoundOff)};
}

Outcome BidCurveMonotonicity(Shared& shared) {
  const UtilityTariff t = StandardTariff();
  std::vector<double> grid;
  for (int k = 0; k < kBidCurvePoints; ++k) {
    grid.push_back(kBidCurveLo +
                   (kBidCurveHi - kBidCurveLo) * k / (kBidCurvePoints - 1));
  }
  double worst_drop = 0.0;
  int unconverged = 0;
  for (int k = 0; k < kBidCurveLams; ++k) {
    const testing::RandomLam lam = testing::MakeRandomLam(kSeed, 500 + k);
    const LamConfig config =
        LamSettings(0.0, lam.elasticity, kBidCurveLamTolerance);
    const auto curve = SampleBidCurve(lam.members, t, config, grid);
    for (std::size_t p = 0; p < curve.size(); ++p) {
      if (!curve[p].converged) ++unconverged;
      if (p > 0) {
        worst_drop =
            std::max(worst_drop, curve[p - 1].uncleared - curve[p].uncleared);
      }
    }
    // Keep the top of each curve for the rationality sweep.
    LamConfig top = config;
    top.base_price = grid.back();
    shared.lams.push_back(
        {lam.members, top, ClearLam(lam.members, t, top)});
  }
  const bool pass = unconverged == 0 && worst_drop <= kBidCurveDrop;
  return {pass, Format("%d LAMs x %d points on [%.2f, %.2f]: largest drop "
                       "%.3e kW (<= %.0e), %d unconverged points",
                       kBidCurveLams, kBidCurvePoints, kBidCurveLo, kBidCurveHi,
                       worst_drop, kBidCurveDrop, unconverged)};
}

Outcome IndividualRationality(const Shared& shared) {
  const UtilityTariff t = StandardTariff();
  double worst = -1e300;
  std::size_t prosumers = 0;
  for (const ClearedLam& c : shared.lams) {
    for (std::size_t j = 0; j < c.members.size(); ++j) {
      const double gain =
          ProsumerCost(c.members[j], t, c.result.decisions[j], c.result.price) -
          OptOutCost(c.members[j], t);
      worst = std::max(worst, gain);
      ++prosumers;
    }
  }
  return {worst <= kRationalitySlack,
          Format("%zu prosumers in %zu LAMs: max (NE cost - opt-out cost) "
                 "%.3e (<= %.0e)",
                 prosumers, shared.lams.size(), worst, kRationalitySlack)};
}

Outcome WamOracleEquivalence(Shared& shared) {
  const Scenario& s = shared.desk;
  WamConfig config = WamConfig::FromScenario(s);
  config.max_iters = kDeskMaxIters;
  const auto t0 = Clock::now();
  const WamResult r = ClearWam(s, config);
  const double seconds = SecondsSince(t0);
  const GlobalQpSolution o =
      SolveGlobalQp(s, GlobalMode::kWithCompetitionLoss, false, Certify());
  shared.worst_oracle_kkt = std::max(shared.worst_oracle_kkt, o.kkt.Max());

  const double objective_gap =
      std::abs(r.equivalent_objective - o.objective) / std::abs(o.objective);
  const double cost_gap =
      std::abs(r.system_cost - o.system_cost) / std::abs(o.system_cost);
  const double balance = std::abs(r.sum_uncleared) / s.TotalDemand();

  std::vector<double> y;
  for (const auto& bid : r.bids) y.push_back(bid.uncleared);
  double row_excess = 0.0, comp = 0.0;
  int binding = 0, binding_unpriced = 0;
  for (std::size_t l = 0; l < s.network.rows.size(); ++l) {
    const NetworkRow& row = s.network.rows[l];
    const double slack = RowFlow(row, y) - row.limit;
    row_excess = std::max(row_excess, slack / (kRowFraction * row.limit));
    comp = std::max(comp, std::abs(r.congestion_prices[l] * slack) /
                              (kRowFraction * row.limit));
    if (o.row_multipliers[l] > kBindingMultiplier) {
      ++binding;
      if (!(r.congestion_prices[l] < 0.0)) ++binding_unpriced;
    }
  }
  const bool pass = r.converged && o.converged && objective_gap <= kWamCostGap &&
                    cost_gap <= kWamCostGap && balance <= kBalanceFraction &&
                    row_excess <= 1.0 && comp <= 1.0 && binding_unpriced == 0 &&
                    seconds <= kDeskSeconds;
  return {pass,
          Format("%zu LAMs x %zu, %zu rows: %d iterations (<= %d), objective "
                 "gap %.3e, system-cost gap %.3e (<= %.0e), |sum y|/demand "
                 "%.3e (<= %.0e), row excess %.3f and complementarity %.3f of "
                 "%.0e*F, %d binding rows all priced: %s, %.2f s (<= %.0f s)",
                 s.communities.size(), s.communities[0].members.size(),
                 s.network.rows.size(), r.iterations, kDeskMaxIters,
                 objective_gap, cost_gap, kWamCostGap, balance,
                 kBalanceFraction, row_excess, comp, kRowFraction, binding,
                 binding_unpriced == 0 ? "yes" : "no", seconds, kDeskSeconds)};
}

std::string Costs(const RegimeCosts& r) {
  return Format("SS %.2f LS %.2f LO %.2f WS %.2f WO %.2f", r.self_sufficiency,
                r.local_sharing, r.local_optimum, r.wide_sharing,
                r.wide_optimum);
}

Outcome RegimeOrdering(const Shared& shared) {
  QpOptions options;
  options.threads = ResolveThreadCount();
  const RegimeCosts desk = ComputeRegimeCosts(shared.desk, options);
  const RegimeCosts full = ComputeRegimeCosts(shared.full, options);
  auto local_gap = [](const RegimeCosts& r) {
    return std::abs(r.local_sharing - r.local_optimum) /
           std::abs(r.local_optimum);
  };
  const bool pass = desk.converged && full.converged &&
                    RegimeOrderingHolds(desk, kOrderingSlack) &&
                    RegimeOrderingHolds(full, kOrderingSlack) &&
                    local_gap(desk) <= kLocalGap && local_gap(full) <= kLocalGap;
  return {pass, Format("desk [%s] |LS-LO|/LO %.2e; full [%s] |LS-LO|/LO "
                       "%.2e (<= %.2f)",
                       Costs(desk).c_str(), local_gap(desk),
                       Costs(full).c_str(), local_gap(full), kLocalGap)};
}

Outcome FullScalePerformance(const Shared& shared) {
  const Scenario& s = shared.full;
  WamConfig config = WamConfig::FromScenario(s);
  config.max_iters = kFullScaleIters;
  config.tolerance = 0.0;
  config.lam.tolerance = kFullScaleLamTolerance;
  config.threads = ResolveThreadCount();
  const WamResult r = ClearWam(s, config);
  const double mean_iters = r.MeanLamIterations();
  const double per_prosumer = r.SecondsPerProsumer(s.NumProsumers());
  const bool pass = r.iterations == kFullScaleIters &&
                    r.wall_seconds <= kFullScaleSeconds &&
                    mean_iters <= kMeanLamIterations &&
                    per_prosumer <= kSecondsPerProsumer;
  return {pass, Format("%zu LAMs / %zu prosumers, %d iterations on %zu "
                       "threads: wall %.2f s (<= %.0f s), mean LAM iterations "
                       "%.2f (<= %.0f), bid time per prosumer %.3e s (<= %.0e)",
                       s.communities.size(), s.NumProsumers(), r.iterations,
                       config.threads, r.wall_seconds, kFullScaleSeconds,
                       mean_iters, kMeanLamIterations, per_prosumer,
                       kSecondsPerProsumer)};
}

int OutsideBand(const WamResult& r, const UtilityTariff& t, double* lo,
                double* hi) {
  int outside = 0;
  *lo = 1e300;
  *hi = -1e300;
  for (const LamResult& lam : r.lams) {
    *lo = std::min(*lo, lam.price);
    *hi = std::max(*hi, lam.price);
    if (lam.price < t.sell_price || lam.price > t.buy_price) ++outside;
  }
  return outside;
}

Outcome NoUtilityAblation(const Shared& shared) {
  const Scenario& s = shared.full;
  WamConfig config = WamConfig::FromScenario(s);
  config.threads = ResolveThreadCount();
  const WamResult with = ClearWam(s, config);
  config.lam.utility_trading = false;
  config.max_iters = kFullScaleIters;
  const WamResult without = ClearWam(s, config);
  double lo_with, hi_with, lo_without, hi_without;
  const int out_with = OutsideBand(with, s.tariff, &lo_with, &hi_with);
  const int out_without =
      OutsideBand(without, s.tariff, &lo_without, &hi_without);
  const bool pass = with.converged && out_with == 0 && out_without >= 1;
  return {pass, Format("with utility: %d outside band, prices [%.4f, %.4f]; "
                       "without: %d outside band, prices [%.4f, %.4f]",
                       out_with, lo_with, hi_with, out_without, lo_without,
                       hi_without)};
}

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

double GradientGap(const QpProblem& problem, std::span<const double> z,
                   const AugmentedTerms* terms) {
  std::vector<double> g(z.size());
  QpGradient(problem, z, g, terms);
  std::vector<double> probe(z.begin(), z.end());
  double worst = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    probe[k] = z[k] + kFiniteStep;
    const double up = QpObjective(problem, probe, terms);
    probe[k] = z[k] - kFiniteStep;
    const double down = QpObjective(problem, probe, terms);
    probe[k] = z[k];
    const double fd = (up - down) / (2.0 * kFiniteStep);
    worst = std::max(worst,
                     std::abs(fd - g[k]) / std::max(1.0, std::abs(g[k])));
  }
  return worst;
}

Outcome NumericalHygiene(Shared& shared) {
  StreamRng rng(kSeed, 3);
  double worst = 0.0;
  // Half the points on local problems, half on the wide-area problems with
  // random augmented-Lagrangian terms.
  const QpProblem global[] = {
      BuildGlobalProblem(shared.desk, GlobalMode::kWithCompetitionLoss),
      BuildGlobalProblem(shared.desk, GlobalMode::kSocialOptimum, true)};
  for (int k = 0; k < kGradientPoints; ++k) {
    if (k % 2 == 0) {
      const testing::RandomLam lam = testing::MakeRandomLam(kSeed, 900 + k);
      const QpProblem p = BuildLamProblem(lam.members, StandardTariff(),
                                          lam.base_price, lam.elasticity);
      worst = std::max(worst, GradientGap(p, RandomPoint(p, rng), nullptr));
    } else {
      const QpProblem& p = global[(k / 2) % 2];
      AugmentedTerms terms;
      terms.penalty = rng.Uniform({1.0, 100.0});
      for (std::size_t r = 0; r < p.equalities.size(); ++r) {
        terms.eq_multipliers.push_back(rng.Uniform({-1.0, 1.0}));
        terms.eq_scale.push_back(rng.Uniform({10.0, 1000.0}));
      }
      for (std::size_t r = 0; r < p.inequalities.size(); ++r) {
        terms.ineq_multipliers.push_back(rng.Uniform({0.0, 1.0}));
        terms.ineq_scale.push_back(rng.Uniform({10.0, 1000.0}));
      }
      worst = std::max(worst, GradientGap(p, RandomPoint(p, rng), &terms));
    }
  }

  const GlobalQpSolution social =
      SolveGlobalQp(shared.desk, GlobalMode::kSocialOptimum, false, Certify());
  const GlobalQpSolution local =
      SolveGlobalQp(shared.desk, GlobalMode::kWithCompetitionLoss, true,
                    Certify());
  shared.worst_oracle_kkt =
      std::max({shared.worst_oracle_kkt, social.kkt.Max(), local.kkt.Max()});

  StreamRng br_rng(kSeed, 4);
  double br_kkt = 0.0;
  for (int k = 0; k < kBestResponseInstances; ++k) {
    const ProsumerParams p = testing::RandomProsumer(br_rng);
    const PriceSignal s{br_rng.Uniform({0.0, 0.3}),
                        br_rng.Uniform({1e-4, 1e-2})};
    const LamResult single = [&] {
      LamResult r;
      const BestResponse br = SolveBestResponse(p, StandardTariff(), s);
      r.decisions = {br.decision};
      r.multipliers = {br.multipliers};
      r.uncleared = br.decision.shared;
      // A one-member market whose frozen signal equals s.
      r.price = s.intercept - s.slope * br.decision.shared;
      return r;
    }();
    LamConfig c = LamSettings(s.intercept, s.slope, kLamTolerance);
    const std::vector<ProsumerParams> one{p};
    // Stationarity in x for a single member uses base - 2a x - mu.
    br_kkt = std::max(br_kkt, CheckEquilibrium(one, StandardTariff(), c, single)
                                  .MaxKkt());
  }

  const bool pass = worst <= kGradientGap && shared.worst_lam_kkt <= kKktResidual &&
                    shared.worst_oracle_kkt <= kKktResidual &&
                    br_kkt <= kKktResidual;
  return {pass, Format("%d gradient points: max relative gap %.3e (<= %.0e); "
                       "KKT max: local markets %.3e, oracles %.3e, best "
                       "responses %.3e (<= %.0e)",
                       kGradientPoints, worst, kGradientGap,
                       shared.worst_lam_kkt, shared.worst_oracle_kkt, br_kkt,
                       kKktResidual)};
}

struct Criterion {
  const char* id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace meshmarket

int main() {
  using namespace meshmarket;
  Shared shared;
  shared.desk = testing::DeskScenario();
  shared.full = testing::FullScaleScenario();

  const std::vector<Criterion> criteria{
      {"AC1", "best-response exactness", [] { return BestResponseExactness(); }},
      {"AC2", "local market matches convex oracle",
       [&] { return LamOracleEquivalence(shared); }},
      {"AC3", "equilibrium identities",
       [&] { return EquilibriumIdentities(shared); }},
      {"AC5", "bid-curve monotonicity",
       [&] { return BidCurveMonotonicity(shared); }},
      {"AC4", "individual rationality",
       [&] { return IndividualRationality(shared); }},
      {"AC6", "wide-area market matches convex oracle",
       [&] { return WamOracleEquivalence(shared); }},
      {"AC7", "regime ordering", [&] { return RegimeOrdering(shared); }},
      {"AC8", "full-scale performance",
       [&] { return FullScalePerformance(shared); }},
      {"AC9", "no-utility ablation", [&] { return NoUtilityAblation(shared); }},
      {"AC10", "numerical hygiene", [&] { return NumericalHygiene(shared); }},
  };

  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %-4s %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.id,
                c.name, SecondsSince(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu of %zu criteria passed\n", criteria.size() - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
