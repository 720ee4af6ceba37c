#include "meshmarket/prosumer.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace meshmarket {

namespace {

double GenerationAt(const ProsumerParams& params, double mu) {
  return std::clamp((mu - params.cost_lin) / params.cost_quad, params.gen_min,
                    params.gen_max);
}

// g(mu) = p(mu) - x(mu) - demand, nondecreasing in mu.
double BalanceGap(const ProsumerParams& params, const PriceSignal& signal,
                  double mu) {
  return GenerationAt(params, mu) - (signal.intercept - mu) / (2.0 * signal.slope) -
         params.demand;
}

// Root of g over the whole real line. g has at most three linear pieces,
// split where generation hits its lower and upper bounds.
double UnboundedRoot(const ProsumerParams& params, const PriceSignal& signal) {
  const double a = signal.slope;
  const double c = params.cost_quad;
  const double b = params.cost_lin;
  const double k = signal.intercept;
  const double d = params.demand;
  const double lower_kink = b + c * params.gen_min;
  const double upper_kink = b + c * params.gen_max;

  if (BalanceGap(params, signal, lower_kink) >= 0.0) {
    return k - 2.0 * a * (params.gen_min - d);
  }
  if (BalanceGap(params, signal, upper_kink) >= 0.0) {
    const double mu = (2.0 * a * b + c * k + 2.0 * a * c * d) / (2.0 * a + c);
    return std::clamp(mu, lower_kink, upper_kink);
  }
  return k - 2.0 * a * (params.gen_max - d);
}

void FillBoundMultipliers(const ProsumerParams& params, double mu,
                          KktMultipliers& m) {
  const double unclamped = (mu - params.cost_lin) / params.cost_quad;
  if (unclamped < params.gen_min) {
    m.mu_lo = params.cost_quad * params.gen_min + params.cost_lin - mu;
  } else if (unclamped > params.gen_max) {
    m.mu_hi = mu - params.cost_quad * params.gen_max - params.cost_lin;
  }
}

void RequireValid(const ProsumerParams& params, const UtilityTariff& tariff) {
  std::vector<Violation> v = Validate(params);
  for (auto& t : Validate(tariff)) v.push_back(std::move(t));
  ThrowIfAny(v);
}

// Coarse-to-fine grid search of a convex function on [lo, hi]. Each level
// samples kPoints intervals and keeps the two intervals around the best
// sample, which contain the minimizer of a convex function. Stops once the
// spacing is at most `step`.
template <typename F>
double GridMinimize(F&& f, double lo, double hi, double step, double* argmin) {
  constexpr int kPoints = 20;
  double best_arg = lo;
  double best_val = f(lo);
  if (!(hi > lo)) {
    *argmin = best_arg;
    return best_val;
  }
  double a = lo;
  double b = hi;
  while (true) {
    const bool final_level = (b - a) <= 2.0 * kPoints * step;
    const int n = final_level
                      ? std::max(1, static_cast<int>(std::ceil((b - a) / step)))
                      : kPoints;
    const double h = (b - a) / n;
    int best_k = 0;
    best_val = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= n; ++k) {
      const double v = f(k == n ? b : a + k * h);
      if (v < best_val) {
        best_val = v;
        best_k = k;
      }
    }
    best_arg = (best_k == n) ? b : a + best_k * h;
    if (final_level) break;
    a = std::max(lo, best_arg - h);
    b = std::min(hi, best_arg + h);
  }
  *argmin = best_arg;
  return best_val;
}

}  // namespace

BestResponse SolveBestResponseUnchecked(const ProsumerParams& params,
                                        const UtilityTariff& tariff,
                                        const PriceSignal& signal,
                                        UtilityAccess access) {
  BestResponse out;
  ProsumerDecision& s = out.decision;
  KktMultipliers& m = out.multipliers;

  double mu;
  enum class Regime { kBuy, kSell, kInterior } regime = Regime::kInterior;
  if (access == UtilityAccess::kEnabled) {
    const double gap_at_buy = BalanceGap(params, signal, tariff.buy_price);
    const double gap_at_sell = BalanceGap(params, signal, tariff.sell_price);
    if (gap_at_buy < 0.0) {
      mu = tariff.buy_price;
      regime = Regime::kBuy;
    } else if (gap_at_sell > 0.0) {
      mu = tariff.sell_price;
      regime = Regime::kSell;
    } else {
      mu = std::clamp(UnboundedRoot(params, signal), tariff.sell_price,
                      tariff.buy_price);
    }
  } else {
    mu = UnboundedRoot(params, signal);
  }

  s.generation = GenerationAt(params, mu);
  s.shared = (signal.intercept - mu) / (2.0 * signal.slope);
  const double gap = s.generation - s.shared - params.demand;
  if (regime == Regime::kBuy) {
    s.buy = std::max(0.0, -gap);
  } else if (regime == Regime::kSell) {
    s.sell = std::max(0.0, gap);
  }

  m.shadow = mu;
  if (access == UtilityAccess::kEnabled) {
    m.mu_buy = tariff.buy_price - mu;
    m.mu_sell = mu - tariff.sell_price;
  }
  FillBoundMultipliers(params, mu, m);
  return out;
}

BestResponse SolveBestResponse(const ProsumerParams& params,
                               const UtilityTariff& tariff,
                               const PriceSignal& signal,
                               UtilityAccess access) {
  RequireValid(params, tariff);
  if (!(signal.slope > 0.0) || !std::isfinite(signal.slope) ||
      !std::isfinite(signal.intercept)) {
    throw InputError("price signal: slope must be > 0 and finite");
  }
  return SolveBestResponseUnchecked(params, tariff, signal, access);
}

ProsumerDecision OptOutDecision(const ProsumerParams& params,
                                const UtilityTariff& tariff) {
  ProsumerDecision s;
  const double at_buy = GenerationAt(params, tariff.buy_price);
  const double at_sell = GenerationAt(params, tariff.sell_price);
  if (at_buy < params.demand) {
    s.generation = at_buy;
    s.buy = params.demand - at_buy;
  } else if (at_sell > params.demand) {
    s.generation = at_sell;
    s.sell = at_sell - params.demand;
  } else {
    s.generation = params.demand;
  }
  return s;
}

double OptOutCost(const ProsumerParams& params, const UtilityTariff& tariff,
                  UtilityAccess access) {
  RequireValid(params, tariff);
  if (access == UtilityAccess::kDisabled) {
    if (params.demand < params.gen_min || params.demand > params.gen_max) {
      return std::numeric_limits<double>::infinity();
    }
    ProsumerDecision s;
    s.generation = params.demand;
    return SystemCost(params, tariff, s);
  }
  return SystemCost(params, tariff, OptOutDecision(params, tariff));
}

double SystemCost(const ProsumerParams& params, const UtilityTariff& tariff,
                  const ProsumerDecision& decision) {
  const double p = decision.generation;
  return 0.5 * params.cost_quad * p * p + params.cost_lin * p +
         tariff.buy_price * decision.buy - tariff.sell_price * decision.sell;
}

double ProsumerCost(const ProsumerParams& params, const UtilityTariff& tariff,
                    const ProsumerDecision& decision, double sharing_price) {
  return SystemCost(params, tariff, decision) - sharing_price * decision.shared;
}

double BestResponseObjective(const ProsumerParams& params,
                             const UtilityTariff& tariff,
                             const PriceSignal& signal,
                             const ProsumerDecision& decision) {
  const double x = decision.shared;
  return SystemCost(params, tariff, decision) -
         (signal.intercept - signal.slope * x) * x;
}

ProsumerDecision BruteForceBestResponse(const ProsumerParams& params,
                                        const UtilityTariff& tariff,
                                        const PriceSignal& signal,
                                        double grid_step,
                                        UtilityAccess access) {
  if (!(grid_step > 0.0)) throw InputError("grid_step must be > 0");
  RequireValid(params, tariff);

  auto decision_at = [&](double p, double x) {
    ProsumerDecision s;
    s.generation = p;
    s.shared = x;
    const double gap = p - params.demand - x;
    if (gap >= 0.0) {
      s.sell = gap;
    } else {
      s.buy = -gap;
    }
    return s;
  };
  auto objective = [&](double p, double x) {
    return BestResponseObjective(params, tariff, signal, decision_at(p, x));
  };

  if (access == UtilityAccess::kDisabled) {
    double p_best = params.gen_min;
    GridMinimize([&](double p) { return objective(p, p - params.demand); },
                 params.gen_min, params.gen_max, grid_step, &p_best);
    ProsumerDecision s;
    s.generation = p_best;
    s.shared = p_best - params.demand;
    return s;
  }

  const double x_range = params.demand + std::abs(params.gen_max) +
                         std::abs(signal.intercept) / signal.slope;
  auto profile = [&](double p, double* x_best) {
    return GridMinimize([&](double x) { return objective(p, x); }, -x_range,
                        x_range, grid_step, x_best);
  };
  double p_best = params.gen_min;
  GridMinimize(
      [&](double p) {
        double x;
        return profile(p, &x);
      },
      params.gen_min, params.gen_max, grid_step, &p_best);
  double x_best = 0.0;
  profile(p_best, &x_best);
  return decision_at(p_best, x_best);
}

}  // namespace meshmarket
