#ifndef MESHMARKET_MODEL_H_
#define MESHMARKET_MODEL_H_

// Domain types shared by every layer of the market engine.
//
// Units: power in kW, prices in currency per kW, price elasticities and
// quadratic cost coefficients in currency per kW^2. Line capacities read from
// files in MW are converted to kW when a scenario is loaded.

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace meshmarket {

// Thrown when an input violates a documented invariant.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Fixed retail prices of the electric utility. Requires buy > sell > 0.
struct UtilityTariff {
  double buy_price = 0.0;
  double sell_price = 0.0;

  static UtilityTariff Make(double buy_price, double sell_price);
};

// Quadratic generation cost (c/2)p^2 + b p, constant demand and
// generation limits of one prosumer.
struct ProsumerParams {
  double cost_quad = 0.0;
  double cost_lin = 0.0;
  double demand = 0.0;
  double gen_min = 0.0;
  double gen_max = 0.0;

  static ProsumerParams Make(double cost_quad, double cost_lin, double demand,
                             double gen_min, double gen_max);
};

// Generation p, purchase from the utility p_buy, sale to the utility p_sell
// and energy shared in the local market x (positive when selling).
// Power balance: demand + x + p_sell == p + p_buy.
struct ProsumerDecision {
  double generation = 0.0;
  double buy = 0.0;
  double sell = 0.0;
  double shared = 0.0;
};

// Lagrange multipliers of the prosumer problem: generation bounds, sign
// constraints on utility trades and the power-balance shadow price.
struct KktMultipliers {
  double mu_lo = 0.0;
  double mu_hi = 0.0;
  double mu_buy = 0.0;
  double mu_sell = 0.0;
  double shadow = 0.0;
};

inline constexpr double kDefaultHalvingThreshold = 1e-3;
inline constexpr double kDefaultOscillationRatio = 0.9;

// Parameters of one local-area market clearing.
struct LamConfig {
  double base_price = 0.0;
  double elasticity = 0.0;
  double tolerance = 1e-8;
  double step = 0.2;
  int max_iters = 10000;
  bool adaptive_halving = true;
  double halving_threshold = kDefaultHalvingThreshold;
  // Also halve when the price reverses and the new move keeps more than this
  // fraction of the previous one (a non-contracting oscillation below the
  // threshold). Zero disables the check.
  double oscillation_ratio = kDefaultOscillationRatio;
  // Also require every member to be within tolerance / elasticity of its
  // unrelaxed best response before stopping. With a price-only test members
  // can still be drifting apart at a constant aggregate.
  bool check_strategies = true;
  // When false prosumers cannot trade with the utility (p_buy = p_sell = 0).
  bool utility_trading = true;
  bool record_trace = false;

  static LamConfig Make(double base_price, double elasticity);
};

// One network constraint sum_i sensitivity[i] * y_i <= limit (kW).
struct NetworkRow {
  std::string label;
  std::vector<double> sensitivity;
  double limit = 0.0;
};

struct NetworkModel {
  std::vector<NetworkRow> rows;
};

enum class CommunityType { kSurplus, kBalance, kDeficit };

const char* ToString(CommunityType type);
CommunityType CommunityTypeFromString(const std::string& name);

struct Community {
  int id = 0;
  int bus = 0;
  double elasticity = 0.0;
  CommunityType type = CommunityType::kBalance;
  std::vector<ProsumerParams> members;
};

// Radial feeder. Edges are (parent, child) pairs with 1-based bus ids.
struct Topology {
  int num_buses = 0;
  std::vector<std::pair<int, int>> edges;
};

struct MonitoredLine {
  int from = 0;
  int to = 0;
  double capacity_kw = 0.0;
};

// Step sizes and tolerances of both market layers.
struct SolverSettings {
  double balance_step = 1e-6;
  double congestion_step = 5e-7;
  double wam_tolerance = 1e-6;
  int wam_max_iters = 5000;
  bool diminishing_steps = false;
  // Starting balance price; NaN selects the midpoint of the tariff band.
  double initial_balance_price = std::numeric_limits<double>::quiet_NaN();
  double lam_tolerance = 1e-8;
  double lam_step = 0.2;
  int lam_max_iters = 10000;
  bool adaptive_halving = true;
  double halving_threshold = kDefaultHalvingThreshold;
  double oscillation_ratio = kDefaultOscillationRatio;
};

inline constexpr int kScenarioVersion = 1;

struct Scenario {
  int version = kScenarioVersion;
  std::uint64_t seed = 0;
  UtilityTariff tariff;
  std::vector<Community> communities;
  Topology topology;
  std::vector<MonitoredLine> monitored_lines;
  // Derived from topology and monitored lines; empty when there are none.
  NetworkModel network;
  SolverSettings solver;

  std::size_t NumProsumers() const;
  double TotalDemand() const;
};

struct Violation {
  std::string path;
  std::string reason;
};

// Invariant checks. Each returns one entry per violated invariant; the
// `path` of every entry is prefixed with `where`.
std::vector<Violation> Validate(const UtilityTariff& tariff,
                                const std::string& where = "tariff");
std::vector<Violation> Validate(const ProsumerParams& params,
                                const std::string& where = "prosumer");
std::vector<Violation> Validate(const LamConfig& config,
                                const std::string& where = "lam");
std::vector<Violation> ValidateDecision(const ProsumerParams& params,
                                        const ProsumerDecision& decision,
                                        const std::string& where = "decision");

std::vector<Violation> ValidateScenario(const Scenario& scenario);

// Throws InputError listing every violation when the list is non-empty.
void ThrowIfAny(const std::vector<Violation>& violations);

// Power-balance residual demand + x + p_sell - p - p_buy.
double BalanceResidual(const ProsumerParams& params,
                       const ProsumerDecision& decision);

}  // namespace meshmarket

#endif  // MESHMARKET_MODEL_H_
