#ifndef MESHMARKET_ORACLE_H_
#define MESHMARKET_ORACLE_H_

// Centralized convex solvers used to certify market outcomes.
//
// Every problem here has the same structure: per-prosumer variables
// (p, p_buy, p_sell) with box bounds, shared energy eliminated through the
// power balance x = p + p_buy - p_sell - demand, and a cost
//
//   sum_j (c_j/2) p_j^2 + b_j p_j + buy*p_buy_j - sell*p_sell_j
//   + sum_i [ linear_x_i * y_i + (agg_quad_i/2) y_i^2
//             + (indiv_quad_i/2) sum_{j in i} x_j^2 ]
//
// where y_i = sum_{j in i} x_j, optionally subject to linear equality and
// inequality rows over the aggregates y. Rows are handled by an augmented
// Lagrangian around an accelerated projected-gradient inner solver.

#include <span>
#include <string>
#include <vector>

#include "meshmarket/model.h"

namespace meshmarket {

struct QpCommunity {
  std::size_t first = 0;
  std::size_t count = 0;
  double linear_x = 0.0;
  double agg_quad = 0.0;
  double indiv_quad = 0.0;
};

// sum_i weights[i] * y_i  (== or <=)  rhs
struct AggregateRow {
  std::string label;
  std::vector<double> weights;
  double rhs = 0.0;
};

struct QpProblem {
  std::vector<ProsumerParams> prosumers;
  UtilityTariff tariff;
  bool utility_trading = true;
  std::vector<QpCommunity> communities;
  std::vector<AggregateRow> equalities;
  std::vector<AggregateRow> inequalities;

  std::size_t NumVariables() const { return 3 * prosumers.size(); }
};

// Augmented-Lagrangian terms in scaled row units: each row value is divided
// by its scale before the multiplier and the penalty apply.
struct AugmentedTerms {
  double penalty = 1.0;
  std::vector<double> eq_multipliers;
  std::vector<double> ineq_multipliers;
  std::vector<double> eq_scale;
  std::vector<double> ineq_scale;
};

double QpObjective(const QpProblem& problem, std::span<const double> z,
                   const AugmentedTerms* augmented = nullptr);
void QpGradient(const QpProblem& problem, std::span<const double> z,
                std::span<double> gradient,
                const AugmentedTerms* augmented = nullptr);

// Shared energy x_j implied by the variables.
std::vector<double> SharedFromVariables(const QpProblem& problem,
                                        std::span<const double> z);
std::vector<ProsumerDecision> DecisionsFromVariables(
    const QpProblem& problem, std::span<const double> z);
std::vector<double> Aggregates(const QpProblem& problem,
                               std::span<const double> z);

// Upper bound on the Lipschitz constant of QpGradient without rows.
double ObjectiveLipschitz(const QpProblem& problem);

struct QpOptions {
  // Infinity norm of the projected-gradient mapping at termination.
  double tolerance = 1e-9;
  long max_iters = 1'000'000;
  double initial_penalty = 1.0;
  double penalty_growth = 10.0;
  double max_penalty = 1e8;
  // Row feasibility relative to the energy scale of the instance.
  double feasibility_tolerance = 1e-8;
  int max_outer = 200;
  // Workers for problems that decompose into independent communities.
  std::size_t threads = 1;
};

struct QpSolution {
  std::vector<double> variables;
  std::vector<ProsumerDecision> decisions;
  std::vector<double> uncleared;
  // -d/dx_j of the Lagrangian part in x: the power-balance shadow price.
  std::vector<double> shadow;
  // Row multipliers in currency per kW (inequalities >= 0).
  std::vector<double> eq_multipliers;
  std::vector<double> ineq_multipliers;
  double objective = 0.0;
  double system_cost = 0.0;
  double gradient_mapping = 0.0;
  double max_violation = 0.0;
  long iterations = 0;
  int outer_iterations = 0;
  bool converged = false;
};

QpSolution SolveQp(const QpProblem& problem, const QpOptions& options = {});

// KKT residuals of a solved instance: stationarity of the Lagrangian as a
// projected-gradient norm, row feasibility, multiplier signs and row
// complementarity |lambda_r * slack_r|.
struct QpKktReport {
  double stationarity = 0.0;
  double feasibility = 0.0;
  double sign = 0.0;
  double complementarity = 0.0;
  double Max() const;
};
QpKktReport CheckQpKkt(const QpProblem& problem, const QpSolution& solution);

// --- Local-area market oracle ---------------------------------------------

struct LamQpSolution {
  std::vector<ProsumerDecision> decisions;
  std::vector<KktMultipliers> multipliers;
  double price = 0.0;
  double uncleared = 0.0;
  // Sum of prosumer costs at the equilibrium sharing price.
  double prosumer_cost = 0.0;
  double system_cost = 0.0;
  double objective = 0.0;
  bool converged = false;
  long iterations = 0;
};

// The convex program whose unique optimum is the local Nash equilibrium:
// pure costs - base * sum x + (a/2)(sum x)^2 + (a/2) sum x^2.
QpProblem BuildLamProblem(std::span<const ProsumerParams> members,
                          const UtilityTariff& tariff, double base_price,
                          double elasticity, bool utility_trading = true);

LamQpSolution SolveLamQp(std::span<const ProsumerParams> members,
                         const UtilityTariff& tariff, double base_price,
                         double elasticity, const QpOptions& options = {},
                         bool utility_trading = true);

// --- Wide-area oracle -----------------------------------------------------

enum class GlobalMode { kWithCompetitionLoss, kSocialOptimum };

struct GlobalQpSolution {
  std::vector<std::vector<ProsumerDecision>> decisions;
  std::vector<double> uncleared;
  // lambda_PB and lambda_l (>= 0) of the clearing and network rows; empty
  // when every community is cleared on its own.
  double balance_multiplier = 0.0;
  std::vector<double> row_multipliers;
  // -lambda_PB - sum_l sensitivity * lambda_l.
  std::vector<double> base_prices;
  double system_cost = 0.0;
  double objective = 0.0;
  double max_violation = 0.0;
  bool converged = false;
  long iterations = 0;
  QpKktReport kkt;
};

// With competition loss: the equivalent program of the two-layer market.
// Social optimum: pure costs under the same constraints. `clear_each`
// replaces the wide-area rows by y_i = 0 for every community.
QpProblem BuildGlobalProblem(const Scenario& scenario, GlobalMode mode,
                             bool clear_each = false,
                             bool utility_trading = true);

GlobalQpSolution SolveGlobalQp(const Scenario& scenario, GlobalMode mode,
                               bool clear_each = false,
                               const QpOptions& options = {},
                               bool utility_trading = true);

// --- Regime comparison ----------------------------------------------------

// Total generation and utility-trade cost of all prosumers under:
//   SS  every prosumer on its own (x = 0),
//   LS  local market cleared inside each community,
//   LO  social optimum inside each community,
//   WS  the two-layer market (wide-area coordinator),
//   WO  wide-area social optimum.
struct RegimeCosts {
  double self_sufficiency = 0.0;
  double local_sharing = 0.0;
  double local_optimum = 0.0;
  double wide_sharing = 0.0;
  double wide_optimum = 0.0;
  bool converged = false;
  int wam_iterations = 0;
};

RegimeCosts ComputeRegimeCosts(const Scenario& scenario,
                               const QpOptions& options = {});

// SS >= LS >= WS >= WO up to a relative slack.
inline constexpr double kRegimeOrderingSlack = 1e-4;
bool RegimeOrderingHolds(const RegimeCosts& costs,
                         double slack = kRegimeOrderingSlack);

}  // namespace meshmarket

#endif  // MESHMARKET_ORACLE_H_
