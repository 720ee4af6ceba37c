#ifndef MESHMARKET_PROSUMER_H_
#define MESHMARKET_PROSUMER_H_

#include "meshmarket/model.h"

namespace meshmarket {

// Linear price seen by one prosumer while the others' bids are frozen:
// the prosumer earns (intercept - slope * x) per unit of shared energy x.
struct PriceSignal {
  double intercept = 0.0;
  double slope = 0.0;
};

enum class UtilityAccess { kEnabled, kDisabled };

struct BestResponse {
  ProsumerDecision decision;
  KktMultipliers multipliers;
};

// Exact minimizer of
//   (c/2)p^2 + b p + buy*p_buy - sell*p_sell - (K - a x) x
// over the prosumer's feasible set. The shadow price mu solves
// clamp((mu - b)/c) - (K - mu)/(2a) - demand = 0, restricted to the tariff
// band when utility trading is enabled; the pieces of that residual are
// linear so the root is found in closed form.
BestResponse SolveBestResponse(const ProsumerParams& params,
                               const UtilityTariff& tariff,
                               const PriceSignal& signal,
                               UtilityAccess access = UtilityAccess::kEnabled);

// Same as SolveBestResponse but without input validation. For hot loops whose
// inputs were validated once up front.
BestResponse SolveBestResponseUnchecked(const ProsumerParams& params,
                                        const UtilityTariff& tariff,
                                        const PriceSignal& signal,
                                        UtilityAccess access);

// Optimal cost when the prosumer trades only with the utility (x = 0).
// Returns +infinity when that is infeasible (utility disabled and demand
// outside the generation range).
double OptOutCost(const ProsumerParams& params, const UtilityTariff& tariff,
                  UtilityAccess access = UtilityAccess::kEnabled);

// Decision attaining OptOutCost.
ProsumerDecision OptOutDecision(const ProsumerParams& params,
                                const UtilityTariff& tariff);

// (c/2)p^2 + b p + buy*p_buy - sell*p_sell - sharing_price * x.
double ProsumerCost(const ProsumerParams& params, const UtilityTariff& tariff,
                    const ProsumerDecision& decision, double sharing_price);

// Generation and utility-trade part of the cost, without sharing payments.
double SystemCost(const ProsumerParams& params, const UtilityTariff& tariff,
                  const ProsumerDecision& decision);

// Objective of the best-response problem at an arbitrary decision.
double BestResponseObjective(const ProsumerParams& params,
                             const UtilityTariff& tariff,
                             const PriceSignal& signal,
                             const ProsumerDecision& decision);

// Test oracle: nested coarse-to-fine grid search over generation p and
// shared energy x down to `grid_step`, utility trades recovered from the sign
// of the balance gap. Independent of the closed form above.
ProsumerDecision BruteForceBestResponse(
    const ProsumerParams& params, const UtilityTariff& tariff,
    const PriceSignal& signal, double grid_step,
    UtilityAccess access = UtilityAccess::kEnabled);

}  // namespace meshmarket

#endif  // MESHMARKET_PROSUMER_H_
