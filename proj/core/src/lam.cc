#include "meshmarket/lam.h"

#include <algorithm>
#include <cmath>
#include <iomanip>

namespace meshmarket {

namespace {

double SumShared(const std::vector<ProsumerDecision>& decisions) {
  double sum = 0.0;
  for (const auto& s : decisions) sum += s.shared;
  return sum;
}

ProsumerDecision Blend(const ProsumerDecision& target,
                       const ProsumerDecision& current, double step) {
  const double keep = 1.0 - step;
  return {step * target.generation + keep * current.generation,
          step * target.buy + keep * current.buy,
          step * target.sell + keep * current.sell,
          step * target.shared + keep * current.shared};
}

// x = 0 with generation as close to demand as the bounds allow and the
// utility covering the rest. Without utility access this may be unbalanced.
ProsumerDecision SelfSupply(const ProsumerParams& p, UtilityAccess access) {
  ProsumerDecision d;
  d.generation = std::clamp(p.demand, p.gen_min, p.gen_max);
  if (access == UtilityAccess::kEnabled) {
    d.buy = std::max(0.0, p.demand - d.generation);
    d.sell = std::max(0.0, d.generation - p.demand);
  }
  return d;
}

double Distance(const ProsumerDecision& a, const ProsumerDecision& b) {
  return std::max({std::abs(a.generation - b.generation),
                   std::abs(a.buy - b.buy), std::abs(a.sell - b.sell),
                   std::abs(a.shared - b.shared)});
}

// Price turned around at the middle sample after two moves larger than
// the threshold.
bool Oscillates(double before, double middle, double after, double threshold) {
  return (middle - before > threshold && middle - after > threshold) ||
         (before - middle > threshold && after - middle > threshold);
}

// Price reversed direction and the new move is not much smaller than the
// previous one. Moves within the stop tolerance are round-off, not a cycle.
bool Persists(double before, double middle, double after, double ratio,
              double tolerance) {
  const double last = middle - before;
  const double move = after - middle;
  return ratio > 0.0 && last * move < 0.0 && std::abs(move) > tolerance &&
         std::abs(move) > ratio * std::abs(last);
}

void RequireValid(std::span<const ProsumerParams> members,
                  const UtilityTariff& tariff, const LamConfig& config) {
  std::vector<Violation> v = Validate(tariff);
  for (auto& t : Validate(config)) v.push_back(std::move(t));
  if (members.empty()) v.push_back({"members", "member list is empty"});
  for (std::size_t j = 0; j < members.size(); ++j) {
    for (auto& t : Validate(members[j], "members[" + std::to_string(j) + "]")) {
      v.push_back(std::move(t));
    }
  }
  ThrowIfAny(v);
}

}  // namespace

double SharingPrice(double base_price, double elasticity,
                    std::span<const double> shared) {
  double sum = 0.0;
  for (double x : shared) sum += x;
  return base_price - elasticity * sum;
}

LamResult ClearLamUnchecked(std::span<const ProsumerParams> members,
                            const UtilityTariff& tariff,
                            const LamConfig& config, const LamStart* start) {
  const std::size_t n = members.size();
  const double a = config.elasticity;
  const UtilityAccess access = config.utility_trading
                                   ? UtilityAccess::kEnabled
                                   : UtilityAccess::kDisabled;

  LamResult result;
  result.decisions.reserve(n);
  for (const ProsumerParams& m : members) {
    result.decisions.push_back(SelfSupply(m, access));
  }
  result.multipliers.assign(n, KktMultipliers{});
  double step = config.step;
  if (start != nullptr) {
    if (start->decisions.size() == n) result.decisions = start->decisions;
    if (start->step > 0.0) step = std::min(start->step, 1.0);
  }

  double prev_price = config.base_price - a * SumShared(result.decisions);
  double older_price = prev_price;
  int h = 0;
  while (h < config.max_iters) {
    ++h;
    double sum = 0.0;
    double gap = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      ProsumerDecision& s = result.decisions[j];
      const PriceSignal signal{prev_price + a * s.shared, a};
      const BestResponse br =
          SolveBestResponseUnchecked(members[j], tariff, signal, access);
      gap = std::max(gap, Distance(br.decision, s));
      s = Blend(br.decision, s, step);
      result.multipliers[j] = br.multipliers;
      sum += s.shared;
    }
    const double price = config.base_price - a * sum;
    if (config.record_trace) result.trace.push_back({h, price, sum, step});

    if (std::abs(price - prev_price) <= config.tolerance &&
        (!config.check_strategies || a * gap <= config.tolerance)) {
      result.converged = true;
      prev_price = price;
      break;
    }
    if (config.adaptive_halving && h >= 2 &&
        (Oscillates(older_price, prev_price, price, config.halving_threshold) ||
         Persists(older_price, prev_price, price, config.oscillation_ratio,
                  config.tolerance))) {
      step *= 0.5;
    }
    older_price = prev_price;
    prev_price = price;
  }

  result.uncleared = SumShared(result.decisions);
  result.price = config.base_price - a * result.uncleared;
  result.iterations = h;
  result.final_step = step;
  return result;
}

LamResult ClearLam(std::span<const ProsumerParams> members,
                   const UtilityTariff& tariff, const LamConfig& config,
                   const LamStart* start) {
  RequireValid(members, tariff, config);
  if (start != nullptr && !start->decisions.empty() &&
      start->decisions.size() != members.size()) {
    throw InputError("warm start has " +
                     std::to_string(start->decisions.size()) +
                     " decisions for " + std::to_string(members.size()) +
                     " members");
  }
  return ClearLamUnchecked(members, tariff, config, start);
}

double EquilibriumReport::MaxKkt() const {
  return std::max({balance, stationarity, sign, complementarity});
}

EquilibriumReport CheckEquilibrium(std::span<const ProsumerParams> members,
                                   const UtilityTariff& tariff,
                                   const LamConfig& config,
                                   const LamResult& result) {
  EquilibriumReport r;
  const std::size_t n = members.size();
  const double a = config.elasticity;
  const double sum = SumShared(result.decisions);
  r.price_identity = std::abs(result.price - (config.base_price - a * sum));

  double shadow_sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const ProsumerParams& pj = members[j];
    const ProsumerDecision& s = result.decisions[j];
    const KktMultipliers& m = result.multipliers[j];
    shadow_sum += m.shadow;

    r.shared_identity = std::max(
        r.shared_identity, std::abs(a * s.shared - (result.price - m.shadow)));
    if (config.utility_trading) {
      r.shadow_band = std::max({r.shadow_band, tariff.sell_price - m.shadow,
                                m.shadow - tariff.buy_price});
    }
    r.balance = std::max(r.balance, std::abs(BalanceResidual(pj, s)));

    const double st_p = pj.cost_quad * s.generation + pj.cost_lin - m.mu_lo +
                        m.mu_hi - m.shadow;
    const double st_x = -config.base_price + a * s.shared + a * sum + m.shadow;
    r.stationarity = std::max({r.stationarity, std::abs(st_p), std::abs(st_x)});
    if (config.utility_trading) {
      const double st_buy = tariff.buy_price - m.mu_buy - m.shadow;
      const double st_sell = -tariff.sell_price - m.mu_sell + m.shadow;
      r.stationarity =
          std::max({r.stationarity, std::abs(st_buy), std::abs(st_sell)});
    } else {
      r.sign = std::max({r.sign, std::abs(s.buy), std::abs(s.sell)});
    }

    const double lo_gap = s.generation - pj.gen_min;
    const double hi_gap = pj.gen_max - s.generation;
    r.sign = std::max({r.sign, -lo_gap, -hi_gap, -s.buy, -s.sell, -m.mu_lo,
                       -m.mu_hi, -m.mu_buy, -m.mu_sell});
    r.complementarity =
        std::max({r.complementarity, std::abs(lo_gap * m.mu_lo),
                  std::abs(hi_gap * m.mu_hi), std::abs(s.buy * m.mu_buy),
                  std::abs(s.sell * m.mu_sell)});
  }
  r.price_average = std::abs(result.price - (config.base_price + shadow_sum) /
                                                (1.0 + static_cast<double>(n)));
  r.price_band_applies = config.base_price >= tariff.sell_price &&
                         config.base_price <= tariff.buy_price;
  r.price_band = std::max({0.0, tariff.sell_price - result.price,
                           result.price - tariff.buy_price});
  return r;
}

std::vector<BidPoint> SampleBidCurve(std::span<const ProsumerParams> members,
                                     const UtilityTariff& tariff,
                                     const LamConfig& config,
                                     std::span<const double> grid) {
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw InputError("bid-curve grid must be sorted ascending");
  }
  std::vector<BidPoint> curve;
  curve.reserve(grid.size());
  LamStart warm;
  for (double base : grid) {
    LamConfig point = config;
    point.base_price = base;
    point.record_trace = false;
    const LamResult r =
        ClearLam(members, tariff, point, warm.decisions.empty() ? nullptr : &warm);
    curve.push_back({base, r.uncleared, r.price, r.converged, r.iterations});
    warm.decisions = r.decisions;
    warm.step = r.final_step;
  }
  return curve;
}

void WriteLamTraceCsv(std::ostream& out,
                      const std::vector<LamIterationTrace>& trace) {
  out << "h,price,sum_x,rho\n";
  out << std::setprecision(17);
  for (const auto& t : trace) {
    out << t.iteration << ',' << t.price << ',' << t.sum_shared << ','
        << t.step << '\n';
  }
}

}  // namespace meshmarket
