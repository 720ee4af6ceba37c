#include "meshmarket/wam.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>

#include "meshmarket/parallel.h"
#include "meshmarket/prosumer.h"

namespace meshmarket {

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::duration d) {
  return std::chrono::duration<double>(d).count();
}

std::vector<double> Uncleared(std::span<const CommunityBid> bids,
                              std::size_t n) {
  std::vector<double> y(n, 0.0);
  for (const auto& bid : bids) y.at(bid.community) = bid.uncleared;
  return y;
}

double MaxRowViolation(const NetworkModel& network,
                       std::span<const double> uncleared) {
  double worst = 0.0;
  for (const auto& row : network.rows) {
    worst = std::max(worst, RowFlow(row, uncleared) - row.limit);
  }
  return worst;
}

void RequireSameStructure(const WamResult& previous, const Scenario& scenario) {
  if (previous.lams.size() != scenario.communities.size()) {
    throw InputError("warm restart: community count differs");
  }
  for (std::size_t i = 0; i < previous.lams.size(); ++i) {
    if (previous.lams[i].decisions.size() !=
        scenario.communities[i].members.size()) {
      throw InputError("warm restart: member count of community " +
                       std::to_string(scenario.communities[i].id) +
                       " differs");
    }
  }
  if (previous.congestion_prices.size() != scenario.network.rows.size()) {
    throw InputError("warm restart: network rows differ");
  }
}

WamResult Run(const Scenario& scenario, const WamConfig& config,
              const WamResult* previous) {
  ThrowIfAny(ValidateScenario(scenario));
  ThrowIfAny(Validate(config.lam, "config.lam"));
  if (!(config.balance_step > 0.0) || !(config.congestion_step > 0.0)) {
    throw InputError("wam step sizes must be > 0");
  }
  const std::size_t n = scenario.communities.size();
  const NetworkModel& network = scenario.network;

  WamState state;
  state.balance_step = config.balance_step;
  state.congestion_steps.assign(network.rows.size(), config.congestion_step);
  state.diminishing = config.diminishing;
  state.tolerance = config.tolerance;
  if (previous != nullptr) {
    state.balance_price = previous->balance_price;
    state.congestion_prices = previous->congestion_prices;
  } else {
    state.balance_price = config.initial_balance_price;
    state.congestion_prices.assign(network.rows.size(), 0.0);
  }
  state.base_prices =
      BasePrices(state.balance_price, state.congestion_prices, network, n);

  std::vector<LamStart> starts(n);
  if (previous != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      starts[i].decisions = previous->lams[i].decisions;
      starts[i].step = previous->lams[i].final_step;
    }
  }

  WamResult result;
  result.lams.resize(n);
  std::vector<double> lam_seconds(n, 0.0);
  std::vector<long> lam_iterations(n, 0);
  WorkerPool pool(std::max<std::size_t>(1, config.threads));
  const auto started = Clock::now();

  std::vector<CommunityBid> bids(n);
  while (state.iteration < config.max_iters) {
    pool.ParallelFor(n, [&](std::size_t i) {
      const Community& community = scenario.communities[i];
      LamConfig lam = config.lam;
      lam.base_price = state.base_prices[i];
      lam.elasticity = community.elasticity;
      const auto t0 = Clock::now();
      const LamStart* start =
          starts[i].decisions.empty() ? nullptr : &starts[i];
      result.lams[i] =
          ClearLamUnchecked(community.members, scenario.tariff, lam, start);
      lam_seconds[i] += Seconds(Clock::now() - t0);
      lam_iterations[i] += result.lams[i].iterations;
      if (config.warm_start_lams) {
        starts[i].decisions = result.lams[i].decisions;
        starts[i].step = result.lams[i].final_step;
      }
      bids[i] = {i, result.lams[i].uncleared, state.base_prices[i]};
    });
    result.lam_clearings += static_cast<long>(n);

    WamState next = UpdatePrices(state, bids, network);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      change = std::max(change,
                        std::abs(next.base_prices[i] - state.base_prices[i]));
    }
    const bool done = change <= config.tolerance;
    if (done) {
      // Report the prices the final bids were computed at.
      state.iteration = next.iteration;
      state.trace = std::move(next.trace);
      result.converged = true;
      break;
    }
    state = std::move(next);
  }

  result.wall_seconds = Seconds(Clock::now() - started);
  for (std::size_t i = 0; i < n; ++i) {
    result.lam_seconds += lam_seconds[i];
    result.lam_iterations += lam_iterations[i];
  }
  result.iterations = state.iteration;
  result.balance_price = state.balance_price;
  result.congestion_prices = state.congestion_prices;
  result.base_prices.clear();
  result.bids = bids;
  for (const auto& bid : bids) result.base_prices.push_back(bid.base_price);
  result.trace = std::move(state.trace);
  const std::vector<double> y = Uncleared(bids, n);
  result.sum_uncleared = 0.0;
  for (double v : y) result.sum_uncleared += v;
  result.max_row_violation = MaxRowViolation(network, y);
  ComputeCosts(scenario, result);
  return result;
}

}  // namespace

std::vector<double> BasePrices(double balance_price,
                               std::span<const double> congestion,
                               const NetworkModel& network,
                               std::size_t num_communities) {
  if (congestion.size() != network.rows.size()) {
    throw InputError("one congestion price per network row required");
  }
  std::vector<double> base(num_communities, balance_price);
  for (std::size_t l = 0; l < network.rows.size(); ++l) {
    const NetworkRow& row = network.rows[l];
    for (std::size_t i = 0; i < num_communities; ++i) {
      base[i] += row.sensitivity[i] * congestion[l];
    }
  }
  return base;
}

double RowFlow(const NetworkRow& row, std::span<const double> uncleared) {
  double flow = 0.0;
  for (std::size_t i = 0; i < uncleared.size(); ++i) {
    flow += row.sensitivity[i] * uncleared[i];
  }
  return flow;
}

WamState UpdatePrices(const WamState& state, std::span<const CommunityBid> bids,
                      const NetworkModel& network) {
  const std::size_t n = state.base_prices.size();
  if (bids.size() != n) {
    throw InputError("update_prices: expected one bid per community");
  }
  const std::vector<double> y = Uncleared(bids, n);
  double sum = 0.0;
  for (double v : y) sum += v;

  const double scale =
      state.diminishing ? 1.0 / std::sqrt(state.iteration + 1.0) : 1.0;
  WamState next = state;
  next.balance_price = state.balance_price - scale * state.balance_step * sum;
  double worst = 0.0;
  for (std::size_t l = 0; l < network.rows.size(); ++l) {
    const double overload = RowFlow(network.rows[l], y) - network.rows[l].limit;
    worst = std::max(worst, overload);
    next.congestion_prices[l] = std::min(
        0.0, state.congestion_prices[l] -
                 scale * state.congestion_steps[l] * overload);
  }
  next.base_prices =
      BasePrices(next.balance_price, next.congestion_prices, network, n);
  next.trace.push_back({state.iteration, state.balance_price,
                        state.congestion_prices, state.base_prices, sum,
                        worst});
  ++next.iteration;
  return next;
}

WamConfig WamConfig::FromScenario(const Scenario& scenario) {
  const SolverSettings& s = scenario.solver;
  WamConfig config;
  config.balance_step = s.balance_step;
  config.congestion_step = s.congestion_step;
  config.tolerance = s.wam_tolerance;
  config.max_iters = s.wam_max_iters;
  config.diminishing = s.diminishing_steps;
  config.initial_balance_price =
      std::isnan(s.initial_balance_price)
          ? 0.5 * (scenario.tariff.buy_price + scenario.tariff.sell_price)
          : s.initial_balance_price;
  config.lam.tolerance = s.lam_tolerance;
  config.lam.step = s.lam_step;
  config.lam.max_iters = s.lam_max_iters;
  config.lam.adaptive_halving = s.adaptive_halving;
  config.lam.halving_threshold = s.halving_threshold;
  config.lam.oscillation_ratio = s.oscillation_ratio;
  // Placeholders; every community overrides both.
  config.lam.base_price = config.initial_balance_price;
  config.lam.elasticity = 1.0;
  return config;
}

double WamResult::MeanLamIterations() const {
  return lam_clearings > 0
             ? static_cast<double>(lam_iterations) / static_cast<double>(lam_clearings)
             : 0.0;
}

double WamResult::SecondsPerProsumer(std::size_t num_prosumers) const {
  return num_prosumers > 0 ? lam_seconds / static_cast<double>(num_prosumers)
                           : 0.0;
}

WamResult ClearWam(const Scenario& scenario, const WamConfig& config) {
  return Run(scenario, config, nullptr);
}

WamResult WarmRestart(const WamResult& previous, const Scenario& scenario,
                      const WamConfig& config) {
  RequireSameStructure(previous, scenario);
  return Run(scenario, config, &previous);
}

void ComputeCosts(const Scenario& scenario, WamResult& result) {
  result.system_cost = 0.0;
  result.prosumer_cost = 0.0;
  result.equivalent_objective = 0.0;
  for (std::size_t i = 0; i < scenario.communities.size(); ++i) {
    const Community& community = scenario.communities[i];
    const LamResult& lam = result.lams[i];
    double sum_sq = 0.0;
    for (std::size_t j = 0; j < community.members.size(); ++j) {
      const ProsumerDecision& s = lam.decisions[j];
      const double cost =
          SystemCost(community.members[j], scenario.tariff, s);
      result.system_cost += cost;
      result.prosumer_cost += cost - lam.price * s.shared;
      sum_sq += s.shared * s.shared;
    }
    result.equivalent_objective +=
        0.5 * community.elasticity * (lam.uncleared * lam.uncleared + sum_sq);
  }
  result.equivalent_objective += result.system_cost;
}

void WriteWamTraceCsv(std::ostream& out, const NetworkModel& network,
                      const std::vector<WamTracePoint>& trace) {
  out << "k,balance_price";
  for (std::size_t l = 0; l < network.rows.size(); ++l) {
    out << ",congestion_" << (network.rows[l].label.empty()
                                  ? std::to_string(l)
                                  : network.rows[l].label);
  }
  out << ",sum_y,max_row_violation\n";
  out << std::setprecision(17);
  for (const auto& t : trace) {
    out << t.iteration << ',' << t.balance_price;
    for (double c : t.congestion_prices) out << ',' << c;
    out << ',' << t.sum_uncleared << ',' << t.max_row_violation << '\n';
  }
}

}  // namespace meshmarket
