#ifndef MESHMARKET_LAM_H_
#define MESHMARKET_LAM_H_

// Local-area market: Nash-equilibrium bidding among the prosumers of one
// community under the sharing price base - a * sum(x).

#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "meshmarket/model.h"
#include "meshmarket/prosumer.h"

namespace meshmarket {

struct LamIterationTrace {
  int iteration = 0;
  double price = 0.0;
  double sum_shared = 0.0;
  double step = 0.0;
};

// Warm start for ClearLam. `step` of zero keeps the configured step. Without
// one every member starts at x = 0 with generation clamped to demand.
struct LamStart {
  std::vector<ProsumerDecision> decisions;
  double step = 0.0;
};

struct LamResult {
  double price = 0.0;
  std::vector<ProsumerDecision> decisions;
  std::vector<KktMultipliers> multipliers;
  // Uncleared energy y = sum of shared energy.
  double uncleared = 0.0;
  int iterations = 0;
  bool converged = false;
  // Relaxation step in force when the loop stopped.
  double final_step = 0.0;
  std::vector<LamIterationTrace> trace;
};

double SharingPrice(double base_price, double elasticity,
                    std::span<const double> shared);

// Jacobi bidding with relaxation. Every round each member best-responds to
// the broadcast price, moves a fraction `step` of the way to its response,
// and the operator republishes the price. Stops when the price moves by at
// most config.tolerance and, with check_strategies, every member is within
// tolerance / a of its best response. With adaptive halving the step is halved whenever the price
// turns around after two consecutive moves larger than the threshold, or
// reverses with a move above oscillation_ratio times the previous one.
LamResult ClearLam(std::span<const ProsumerParams> members,
                   const UtilityTariff& tariff, const LamConfig& config,
                   const LamStart* start = nullptr);

// Same loop without input validation; used by the wide-area coordinator
// after validating the scenario once.
LamResult ClearLamUnchecked(std::span<const ProsumerParams> members,
                            const UtilityTariff& tariff,
                            const LamConfig& config,
                            const LamStart* start = nullptr);

// Residuals of the equilibrium identities and of the members' KKT systems.
// Price-valued residuals are in currency per kW.
struct EquilibriumReport {
  // |price - (base - a * sum x)|
  double price_identity = 0.0;
  // max_j |a * x_j - (price - shadow_j)|
  double shared_identity = 0.0;
  // |price - (base + sum shadow_j) / (1 + n)|
  double price_average = 0.0;
  // Largest excursion of any shadow price outside [sell, buy].
  double shadow_band = 0.0;
  // Excursion of the sharing price outside [sell, buy]; only meaningful when
  // price_band_applies (base price inside the band).
  double price_band = 0.0;
  bool price_band_applies = false;
  double balance = 0.0;
  // Stationarity in p, p_buy, p_sell and x.
  double stationarity = 0.0;
  // Sign violations of primal and dual variables.
  double sign = 0.0;
  // Largest complementarity product.
  double complementarity = 0.0;

  double MaxKkt() const;
};

EquilibriumReport CheckEquilibrium(std::span<const ProsumerParams> members,
                                   const UtilityTariff& tariff,
                                   const LamConfig& config,
                                   const LamResult& result);

struct BidPoint {
  double base_price = 0.0;
  double uncleared = 0.0;
  double sharing_price = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Uncleared energy y(base) for each base price of an ascending grid.
// config.base_price is ignored. Consecutive points warm start each other.
std::vector<BidPoint> SampleBidCurve(std::span<const ProsumerParams> members,
                                     const UtilityTariff& tariff,
                                     const LamConfig& config,
                                     std::span<const double> grid);

// CSV with header h,price,sum_x,rho.
void WriteLamTraceCsv(std::ostream& out,
                      const std::vector<LamIterationTrace>& trace);

}  // namespace meshmarket

#endif  // MESHMARKET_LAM_H_
