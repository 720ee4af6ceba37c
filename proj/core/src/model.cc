#include "meshmarket/model.h"

#include <cmath>
#include <set>
#include <sstream>

namespace meshmarket {

namespace {

constexpr double kBalanceTolerance = 1e-9;

void Add(std::vector<Violation>& out, const std::string& path,
         const std::string& reason) {
  out.push_back({path, reason});
}

void Append(std::vector<Violation>& out, std::vector<Violation> more) {
  for (auto& v : more) out.push_back(std::move(v));
}

bool Finite(double v) { return std::isfinite(v); }

}  // namespace

UtilityTariff UtilityTariff::Make(double buy_price, double sell_price) {
  UtilityTariff tariff{buy_price, sell_price};
  ThrowIfAny(Validate(tariff));
  return tariff;
}

ProsumerParams ProsumerParams::Make(double cost_quad, double cost_lin,
                                    double demand, double gen_min,
                                    double gen_max) {
  ProsumerParams params{cost_quad, cost_lin, demand, gen_min, gen_max};
  ThrowIfAny(Validate(params));
  return params;
}

LamConfig LamConfig::Make(double base_price, double elasticity) {
  LamConfig config;
  config.base_price = base_price;
  config.elasticity = elasticity;
  ThrowIfAny(Validate(config));
  return config;
}

const char* ToString(CommunityType type) {
  switch (type) {
    case CommunityType::kSurplus:
      return "surplus";
    case CommunityType::kBalance:
      return "balance";
    case CommunityType::kDeficit:
      return "deficit";
  }
  return "balance";
}

CommunityType CommunityTypeFromString(const std::string& name) {
  if (name == "surplus") return CommunityType::kSurplus;
  if (name == "balance") return CommunityType::kBalance;
  if (name == "deficit") return CommunityType::kDeficit;
  throw InputError("unknown community type '" + name + "'");
}

std::size_t Scenario::NumProsumers() const {
  std::size_t n = 0;
  for (const auto& c : communities) n += c.members.size();
  return n;
}

double Scenario::TotalDemand() const {
  double total = 0.0;
  for (const auto& c : communities) {
    for (const auto& m : c.members) total += m.demand;
  }
  return total;
}

std::vector<Violation> Validate(const UtilityTariff& tariff,
                                const std::string& where) {
  std::vector<Violation> out;
  if (!Finite(tariff.buy_price) || !Finite(tariff.sell_price)) {
    Add(out, where, "prices must be finite");
    return out;
  }
  if (!(tariff.sell_price > 0.0)) {
    Add(out, where + ".sell_price", "Assumption 1: sell price must be > 0");
  }
  if (!(tariff.buy_price > tariff.sell_price)) {
    Add(out, where, "Assumption 1: buy price must exceed sell price");
  }
  return out;
}

std::vector<Violation> Validate(const ProsumerParams& params,
                                const std::string& where) {
  std::vector<Violation> out;
  if (!Finite(params.cost_quad) || !Finite(params.cost_lin) ||
      !Finite(params.demand) || !Finite(params.gen_min) ||
      !Finite(params.gen_max)) {
    Add(out, where, "parameters must be finite");
    return out;
  }
  if (!(params.cost_quad > 0.0)) {
    Add(out, where + ".cost_quad", "quadratic cost must be > 0");
  }
  if (params.demand < 0.0) {
    Add(out, where + ".demand", "demand must be >= 0");
  }
  if (params.gen_min > params.gen_max) {
    Add(out, where + ".gen_max", "gen bounds: gen_min must not exceed gen_max");
  }
  return out;
}

std::vector<Violation> Validate(const LamConfig& config,
                                const std::string& where) {
  std::vector<Violation> out;
  if (!Finite(config.base_price)) {
    Add(out, where + ".base_price", "base price must be finite");
  }
  if (!(config.elasticity > 0.0) || !Finite(config.elasticity)) {
    Add(out, where + ".elasticity", "elasticity must be > 0");
  }
  if (!(config.tolerance >= 0.0)) {
    Add(out, where + ".tolerance", "tolerance must be >= 0");
  }
  if (!(config.step > 0.0 && config.step <= 1.0)) {
    Add(out, where + ".step", "step must lie in (0, 1]");
  }
  if (config.max_iters < 1) {
    Add(out, where + ".max_iters", "max_iters must be >= 1");
  }
  if (!(config.halving_threshold >= 0.0)) {
    Add(out, where + ".halving_threshold", "threshold must be >= 0");
  }
  if (!(config.oscillation_ratio >= 0.0)) {
    Add(out, where + ".oscillation_ratio", "ratio must be >= 0");
  }
  return out;
}

std::vector<Violation> ValidateDecision(const ProsumerParams& params,
                                        const ProsumerDecision& decision,
                                        const std::string& where) {
  std::vector<Violation> out;
  const double scale = 1.0 + std::abs(params.demand) +
                       std::abs(decision.generation) + std::abs(decision.shared);
  if (decision.generation < params.gen_min - kBalanceTolerance * scale ||
      decision.generation > params.gen_max + kBalanceTolerance * scale) {
    Add(out, where + ".generation", "generation outside bounds");
  }
  if (decision.buy < 0.0) Add(out, where + ".buy", "purchase must be >= 0");
  if (decision.sell < 0.0) Add(out, where + ".sell", "sale must be >= 0");
  if (std::abs(BalanceResidual(params, decision)) > kBalanceTolerance * scale) {
    Add(out, where, "power balance violated");
  }
  return out;
}

std::vector<Violation> ValidateScenario(const Scenario& scenario) {
  std::vector<Violation> out;
  if (scenario.version != kScenarioVersion) {
    Add(out, "version", "unsupported version " +
                            std::to_string(scenario.version));
  }
  Append(out, Validate(scenario.tariff, "tariff"));
  if (scenario.communities.empty()) {
    Add(out, "communities", "scenario has no communities");
  }

  const int num_buses = scenario.topology.num_buses;
  std::set<int> ids;
  for (std::size_t i = 0; i < scenario.communities.size(); ++i) {
    const Community& c = scenario.communities[i];
    const std::string path = "communities[" + std::to_string(i) + "]";
    if (!ids.insert(c.id).second) {
      Add(out, path + ".id", "duplicate community id");
    }
    if (!(c.elasticity > 0.0) || !Finite(c.elasticity)) {
      Add(out, path + ".elasticity", "elasticity must be > 0");
    }
    if (c.members.empty()) {
      Add(out, path + ".members", "community has no prosumers");
    }
    if (num_buses > 0 && (c.bus < 1 || c.bus > num_buses)) {
      Add(out, path + ".bus", "bus not in topology");
    }
    for (std::size_t j = 0; j < c.members.size(); ++j) {
      Append(out, Validate(c.members[j],
                           path + ".members[" + std::to_string(j) + "]"));
    }
  }

  std::set<std::pair<int, int>> edges;
  for (const auto& [parent, child] : scenario.topology.edges) {
    edges.insert({std::min(parent, child), std::max(parent, child)});
  }
  for (std::size_t l = 0; l < scenario.monitored_lines.size(); ++l) {
    const MonitoredLine& line = scenario.monitored_lines[l];
    const std::string path = "monitored_lines[" + std::to_string(l) + "]";
    if (!(line.capacity_kw >= 0.0)) {
      Add(out, path + ".capacity", "capacity must be >= 0");
    }
    if (!edges.count({std::min(line.from, line.to),
                      std::max(line.from, line.to)})) {
      Add(out, path, "line is not an edge of the topology");
    }
  }

  for (std::size_t r = 0; r < scenario.network.rows.size(); ++r) {
    const NetworkRow& row = scenario.network.rows[r];
    const std::string path = "network.rows[" + std::to_string(r) + "]";
    if (row.sensitivity.size() != scenario.communities.size()) {
      Add(out, path + ".sensitivity",
          "row references communities that do not exist");
    }
    if (!(row.limit >= 0.0)) Add(out, path + ".limit", "limit must be >= 0");
  }

  const SolverSettings& s = scenario.solver;
  if (!(s.balance_step > 0.0)) {
    Add(out, "solver.balance_step", "step must be > 0");
  }
  if (!(s.congestion_step > 0.0)) {
    Add(out, "solver.congestion_step", "step must be > 0");
  }
  if (!(s.wam_tolerance >= 0.0)) {
    Add(out, "solver.wam_tolerance", "tolerance must be >= 0");
  }
  if (s.wam_max_iters < 1) {
    Add(out, "solver.wam_max_iters", "must be >= 1");
  }
  if (!(s.lam_tolerance >= 0.0)) {
    Add(out, "solver.lam_tolerance", "tolerance must be >= 0");
  }
  if (!(s.lam_step > 0.0 && s.lam_step <= 1.0)) {
    Add(out, "solver.lam_step", "step must lie in (0, 1]");
  }
  if (s.lam_max_iters < 1) {
    Add(out, "solver.lam_max_iters", "must be >= 1");
  }
  return out;
}

void ThrowIfAny(const std::vector<Violation>& violations) {
  if (violations.empty()) return;
  std::ostringstream msg;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i > 0) msg << "; ";
    msg << violations[i].path << ": " << violations[i].reason;
  }
  throw InputError(msg.str());
}

double BalanceResidual(const ProsumerParams& params,
                       const ProsumerDecision& decision) {
  return params.demand + decision.shared + decision.sell -
         decision.generation - decision.buy;
}

}  // namespace meshmarket
