#ifndef MESHMARKET_WAM_H_
#define MESHMARKET_WAM_H_

// Wide-area market: the coordinator broadcasts one base price per community,
// collects each community's uncleared energy at its local equilibrium and
// moves the balance and congestion prices against the observed imbalance and
// line overloads.
//
// Sign convention: congestion prices are <= 0, and the base price of
// community i is balance + sum_l sensitivity[l][i] * congestion[l]. The
// multipliers of the equivalent convex program are lambda_PB = -balance and
// lambda_l = -congestion[l].

#include <ostream>
#include <span>
#include <vector>

#include "meshmarket/lam.h"
#include "meshmarket/model.h"

namespace meshmarket {

struct CommunityBid {
  std::size_t community = 0;
  double uncleared = 0.0;
  double base_price = 0.0;
};

struct WamTracePoint {
  int iteration = 0;
  double balance_price = 0.0;
  std::vector<double> congestion_prices;
  std::vector<double> base_prices;
  double sum_uncleared = 0.0;
  double max_row_violation = 0.0;
};

struct WamState {
  double balance_price = 0.0;
  std::vector<double> congestion_prices;
  std::vector<double> base_prices;
  double balance_step = 1e-6;
  std::vector<double> congestion_steps;
  // Scale both steps by 1/sqrt(iteration + 1).
  bool diminishing = false;
  double tolerance = 1e-6;
  int iteration = 0;
  std::vector<WamTracePoint> trace;
};

// balance + sum_l sensitivity[l][i] * congestion[l] for every community.
std::vector<double> BasePrices(double balance_price,
                               std::span<const double> congestion,
                               const NetworkModel& network,
                               std::size_t num_communities);

// Line flow sum_i sensitivity[i] * y_i of one row.
double RowFlow(const NetworkRow& row, std::span<const double> uncleared);

// One coordinator price step:
//   balance    <- balance - step_PB * sum_i y_i
//   congestion <- min(0, congestion - step_l * (flow_l - limit_l))
// The base prices are recomputed, the iteration counter incremented and the
// bids recorded in the trace.
WamState UpdatePrices(const WamState& state, std::span<const CommunityBid> bids,
                      const NetworkModel& network);

struct WamConfig {
  double balance_step = 1e-6;
  double congestion_step = 5e-7;
  double tolerance = 1e-6;
  int max_iters = 5000;
  bool diminishing = false;
  double initial_balance_price = 0.0;
  // Convergence settings shared by every community clearing; base price and
  // elasticity are filled per community.
  LamConfig lam;
  bool warm_start_lams = true;
  std::size_t threads = 1;

  static WamConfig FromScenario(const Scenario& scenario);
};

struct WamResult {
  bool converged = false;
  int iterations = 0;
  double balance_price = 0.0;
  std::vector<double> congestion_prices;
  std::vector<double> base_prices;
  std::vector<LamResult> lams;
  std::vector<CommunityBid> bids;
  std::vector<WamTracePoint> trace;

  double sum_uncleared = 0.0;
  double max_row_violation = 0.0;
  // Generation and utility-trade cost of all prosumers.
  double system_cost = 0.0;
  // Sum of prosumer costs including payments at their local sharing prices.
  double prosumer_cost = 0.0;
  // Objective of the equivalent convex program: system cost plus the
  // competition loss (a_i/2) y_i^2 + (a_i/2) sum_j x_j^2 of every community.
  double equivalent_objective = 0.0;

  long lam_clearings = 0;
  long lam_iterations = 0;
  // Wall-clock seconds of the whole loop and summed compute seconds of all
  // community clearings.
  double wall_seconds = 0.0;
  double lam_seconds = 0.0;

  double MeanLamIterations() const;
  // Serial-equivalent compute seconds per prosumer for the whole run.
  double SecondsPerProsumer(std::size_t num_prosumers) const;
};

WamResult ClearWam(const Scenario& scenario, const WamConfig& config);

// Restarts from the prices and community decisions of `previous`. The
// scenario must have the same communities, member counts and network rows.
WamResult WarmRestart(const WamResult& previous, const Scenario& scenario,
                      const WamConfig& config);

// Totals of a set of community results priced as in WamResult.
void ComputeCosts(const Scenario& scenario, WamResult& result);

// CSV with header k,balance_price,congestion_<row>...,sum_y,max_row_violation.
void WriteWamTraceCsv(std::ostream& out, const NetworkModel& network,
                      const std::vector<WamTracePoint>& trace);

}  // namespace meshmarket

#endif  // MESHMARKET_WAM_H_
