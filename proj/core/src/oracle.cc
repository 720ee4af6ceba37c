#include "meshmarket/oracle.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "meshmarket/parallel.h"
#include "meshmarket/prosumer.h"
#include "meshmarket/wam.h"

namespace meshmarket {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double LowerBound(const QpProblem& q, std::size_t k) {
  const std::size_t j = k / 3;
  return k % 3 == 0 ? q.prosumers[j].gen_min : 0.0;
}

double UpperBound(const QpProblem& q, std::size_t k) {
  const std::size_t j = k / 3;
  if (k % 3 == 0) return q.prosumers[j].gen_max;
  return q.utility_trading ? kInf : 0.0;
}

double RowValue(const AggregateRow& row, std::span<const double> y) {
  double v = -row.rhs;
  for (std::size_t i = 0; i < y.size(); ++i) v += row.weights[i] * y[i];
  return v;
}

// Per-community derivative of the row terms with respect to y_i, given the
// effective (already combined) multiplier of every row in currency per kW.
std::vector<double> RowPull(const QpProblem& q,
                            std::span<const double> eq_effective,
                            std::span<const double> ineq_effective) {
  std::vector<double> pull(q.communities.size(), 0.0);
  for (std::size_t r = 0; r < q.equalities.size(); ++r) {
    for (std::size_t i = 0; i < pull.size(); ++i) {
      pull[i] += q.equalities[r].weights[i] * eq_effective[r];
    }
  }
  for (std::size_t r = 0; r < q.inequalities.size(); ++r) {
    for (std::size_t i = 0; i < pull.size(); ++i) {
      pull[i] += q.inequalities[r].weights[i] * ineq_effective[r];
    }
  }
  return pull;
}

// Effective multipliers of the augmented terms: lambda + penalty * v for
// equalities and max(0, lambda + penalty * v) for inequalities, converted
// back to unscaled rows.
void EffectiveMultipliers(const QpProblem& q, const AugmentedTerms& aug,
                          std::span<const double> y, std::vector<double>& eq,
                          std::vector<double>& ineq) {
  eq.assign(q.equalities.size(), 0.0);
  ineq.assign(q.inequalities.size(), 0.0);
  for (std::size_t r = 0; r < eq.size(); ++r) {
    const double s = aug.eq_scale[r];
    const double v = RowValue(q.equalities[r], y) / s;
    eq[r] = (aug.eq_multipliers[r] + aug.penalty * v) / s;
  }
  for (std::size_t r = 0; r < ineq.size(); ++r) {
    const double s = aug.ineq_scale[r];
    const double v = RowValue(q.inequalities[r], y) / s;
    ineq[r] = std::max(0.0, aug.ineq_multipliers[r] + aug.penalty * v) / s;
  }
}

// Gradient of the objective plus fixed unscaled row multipliers.
void GradientWithPull(const QpProblem& q, std::span<const double> z,
                      std::span<const double> y, std::span<const double> pull,
                      std::span<double> g) {
  const UtilityTariff& t = q.tariff;
  for (std::size_t i = 0; i < q.communities.size(); ++i) {
    const QpCommunity& c = q.communities[i];
    const double common = c.linear_x + c.agg_quad * y[i] + pull[i];
    for (std::size_t j = c.first; j < c.first + c.count; ++j) {
      const ProsumerParams& pj = q.prosumers[j];
      const double x = z[3 * j] + z[3 * j + 1] - z[3 * j + 2] - pj.demand;
      const double gx = common + c.indiv_quad * x;
      g[3 * j] = pj.cost_quad * z[3 * j] + pj.cost_lin + gx;
      g[3 * j + 1] = t.buy_price + gx;
      g[3 * j + 2] = -t.sell_price - gx;
    }
  }
}

// Infinity norm of (z - P(z - g/L)) * L.
double GradientMapping(const QpProblem& q, std::span<const double> z,
                       std::span<const double> g, double lipschitz) {
  double worst = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double moved = std::clamp(z[k] - g[k] / lipschitz, LowerBound(q, k),
                                    UpperBound(q, k));
    worst = std::max(worst, std::abs(z[k] - moved) * lipschitz);
  }
  return worst;
}

double EnergyScale(const QpProblem& q) {
  double s = 0.0;
  for (const auto& p : q.prosumers) {
    s += std::abs(p.demand) + std::max(std::abs(p.gen_min), std::abs(p.gen_max));
  }
  return std::max(1.0, s);
}

struct InnerResult {
  long iterations = 0;
  double mapping = kInf;
  bool converged = false;
};

// Accelerated projected gradient with gradient-based adaptive restart.
InnerResult Fista(const QpProblem& q, const AugmentedTerms* aug,
                  double lipschitz, double tolerance, long max_iters,
                  std::vector<double>& z) {
  const std::size_t m = z.size();
  std::vector<double> y = z, z_prev = z, z_next(m), g(m);
  double t = 1.0;
  InnerResult out;
  const double inv_l = 1.0 / lipschitz;
  for (long it = 0; it < max_iters; ++it) {
    ++out.iterations;
    QpGradient(q, y, g, aug);
    double mapping = 0.0;
    double restart_test = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      z_next[k] = std::clamp(y[k] - g[k] * inv_l, LowerBound(q, k),
                             UpperBound(q, k));
      mapping = std::max(mapping, std::abs(y[k] - z_next[k]) * lipschitz);
      restart_test += (y[k] - z_next[k]) * (z_next[k] - z[k]);
    }
    if (mapping <= tolerance) {
      // Confirm at the point actually returned.
      QpGradient(q, z_next, g, aug);
      const double at_next = GradientMapping(q, z_next, g, lipschitz);
      if (at_next <= tolerance) {
        z = z_next;
        out.mapping = at_next;
        out.converged = true;
        return out;
      }
    }
    z_prev.swap(z);
    z = z_next;
    if (restart_test > 0.0) {
      t = 1.0;
      y = z;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    for (std::size_t k = 0; k < m; ++k) y[k] = z[k] + beta * (z[k] - z_prev[k]);
    t = t_next;
  }
  QpGradient(q, z, g, aug);
  out.mapping = GradientMapping(q, z, g, lipschitz);
  out.converged = out.mapping <= tolerance;
  return out;
}

std::vector<double> OptOutStart(const QpProblem& q) {
  std::vector<double> z(q.NumVariables(), 0.0);
  for (std::size_t j = 0; j < q.prosumers.size(); ++j) {
    const ProsumerParams& p = q.prosumers[j];
    if (q.utility_trading) {
      const ProsumerDecision d = OptOutDecision(p, q.tariff);
      z[3 * j] = d.generation;
      z[3 * j + 1] = d.buy;
      z[3 * j + 2] = d.sell;
    } else {
      z[3 * j] = std::clamp(p.demand, p.gen_min, p.gen_max);
    }
  }
  return z;
}

double RowScale(const QpProblem& q, const AggregateRow& row, double lf,
                std::size_t num_rows) {
  double w2n = 0.0;
  for (std::size_t i = 0; i < q.communities.size(); ++i) {
    w2n += row.weights[i] * row.weights[i] *
           static_cast<double>(q.communities[i].count);
  }
  const double s = std::sqrt(3.0 * w2n * static_cast<double>(num_rows) / lf);
  return s > 0.0 ? s : 1.0;
}

void ValidateProblem(const QpProblem& q) {
  std::vector<Violation> v = Validate(q.tariff);
  for (std::size_t j = 0; j < q.prosumers.size(); ++j) {
    for (auto& t :
         Validate(q.prosumers[j], "prosumers[" + std::to_string(j) + "]")) {
      v.push_back(std::move(t));
    }
  }
  std::size_t covered = 0;
  for (std::size_t i = 0; i < q.communities.size(); ++i) {
    const QpCommunity& c = q.communities[i];
    const std::string path = "communities[" + std::to_string(i) + "]";
    if (c.first != covered) v.push_back({path, "communities must tile prosumers"});
    covered = c.first + c.count;
    if (c.agg_quad < 0.0 || c.indiv_quad < 0.0) {
      v.push_back({path, "quadratic coupling terms must be >= 0"});
    }
  }
  if (covered != q.prosumers.size()) {
    v.push_back({"communities", "communities must cover every prosumer"});
  }
  for (const auto* rows : {&q.equalities, &q.inequalities}) {
    for (const auto& row : *rows) {
      if (row.weights.size() != q.communities.size()) {
        v.push_back({"rows." + row.label, "one weight per community required"});
      }
    }
  }
  ThrowIfAny(v);
}

}  // namespace

double QpObjective(const QpProblem& q, std::span<const double> z,
                   const AugmentedTerms* aug) {
  double f = 0.0;
  const UtilityTariff& t = q.tariff;
  for (std::size_t j = 0; j < q.prosumers.size(); ++j) {
    const ProsumerParams& pj = q.prosumers[j];
    const double p = z[3 * j];
    f += 0.5 * pj.cost_quad * p * p + pj.cost_lin * p +
         t.buy_price * z[3 * j + 1] - t.sell_price * z[3 * j + 2];
  }
  const std::vector<double> x = SharedFromVariables(q, z);
  std::vector<double> y(q.communities.size(), 0.0);
  for (std::size_t i = 0; i < q.communities.size(); ++i) {
    const QpCommunity& c = q.communities[i];
    double sq = 0.0;
    for (std::size_t j = c.first; j < c.first + c.count; ++j) {
      y[i] += x[j];
      sq += x[j] * x[j];
    }
    f += c.linear_x * y[i] + 0.5 * c.agg_quad * y[i] * y[i] +
         0.5 * c.indiv_quad * sq;
  }
  if (aug != nullptr) {
    const double rho = aug->penalty;
    for (std::size_t r = 0; r < q.equalities.size(); ++r) {
      const double v = RowValue(q.equalities[r], y) / aug->eq_scale[r];
      f += aug->eq_multipliers[r] * v + 0.5 * rho * v * v;
    }
    for (std::size_t r = 0; r < q.inequalities.size(); ++r) {
      const double v = RowValue(q.inequalities[r], y) / aug->ineq_scale[r];
      const double lam = aug->ineq_multipliers[r];
      const double shifted = std::max(0.0, lam + rho * v);
      f += (shifted * shifted - lam * lam) / (2.0 * rho);
    }
  }
  return f;
}

void QpGradient(const QpProblem& q, std::span<const double> z,
                std::span<double> gradient, const AugmentedTerms* aug) {
  const std::vector<double> y = Aggregates(q, z);
  std::vector<double> pull(q.communities.size(), 0.0);
  if (aug != nullptr) {
    std::vector<double> eq, ineq;
    EffectiveMultipliers(q, *aug, y, eq, ineq);
    pull = RowPull(q, eq, ineq);
  }
  GradientWithPull(q, z, y, pull, gradient);
}

std::vector<double> SharedFromVariables(const QpProblem& q,
                                        std::span<const double> z) {
  std::vector<double> x(q.prosumers.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    x[j] = z[3 * j] + z[3 * j + 1] - z[3 * j + 2] - q.prosumers[j].demand;
  }
  return x;
}

std::vector<ProsumerDecision> DecisionsFromVariables(
    const QpProblem& q, std::span<const double> z) {
  std::vector<ProsumerDecision> d(q.prosumers.size());
  for (std::size_t j = 0; j < d.size(); ++j) {
    d[j].generation = z[3 * j];
    d[j].buy = z[3 * j + 1];
    d[j].sell = z[3 * j + 2];
    d[j].shared = z[3 * j] + z[3 * j + 1] - z[3 * j + 2] - q.prosumers[j].demand;
  }
  return d;
}

std::vector<double> Aggregates(const QpProblem& q, std::span<const double> z) {
  std::vector<double> y(q.communities.size(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const QpCommunity& c = q.communities[i];
    for (std::size_t j = c.first; j < c.first + c.count; ++j) {
      y[i] += z[3 * j] + z[3 * j + 1] - z[3 * j + 2] - q.prosumers[j].demand;
    }
  }
  return y;
}

double ObjectiveLipschitz(const QpProblem& q) {
  double max_c = 0.0;
  for (const auto& p : q.prosumers) max_c = std::max(max_c, p.cost_quad);
  double max_x = 0.0;
  for (const auto& c : q.communities) {
    max_x = std::max(max_x, c.agg_quad * static_cast<double>(c.count) +
                                c.indiv_quad);
  }
  return max_c + 3.0 * max_x;
}

QpSolution SolveQp(const QpProblem& q, const QpOptions& options) {
  ValidateProblem(q);
  QpSolution sol;
  std::vector<double> z = OptOutStart(q);
  const double lf = ObjectiveLipschitz(q);
  const std::size_t num_rows = q.equalities.size() + q.inequalities.size();

  AugmentedTerms aug;
  aug.penalty = options.initial_penalty;
  aug.eq_multipliers.assign(q.equalities.size(), 0.0);
  aug.ineq_multipliers.assign(q.inequalities.size(), 0.0);
  for (const auto& row : q.equalities) {
    aug.eq_scale.push_back(RowScale(q, row, lf, num_rows));
  }
  for (const auto& row : q.inequalities) {
    aug.ineq_scale.push_back(RowScale(q, row, lf, num_rows));
  }

  const double energy = EnergyScale(q);
  auto row_tolerance = [&](const AggregateRow& row) {
    return options.feasibility_tolerance * std::max(1.0, std::abs(row.rhs)) *
           (row.rhs == 0.0 ? energy : 1.0);
  };

  long budget = options.max_iters;
  if (num_rows == 0) {
    const InnerResult r = Fista(q, nullptr, lf, options.tolerance, budget, z);
    sol.iterations = r.iterations;
    sol.gradient_mapping = r.mapping;
    sol.converged = r.converged;
  } else {
    double previous_violation = kInf;
    for (int outer = 0; outer < options.max_outer && budget > 0; ++outer) {
      ++sol.outer_iterations;
      const double lipschitz = lf * (1.0 + aug.penalty);
      const InnerResult r =
          Fista(q, &aug, lipschitz, options.tolerance, budget, z);
      budget -= r.iterations;
      sol.iterations += r.iterations;
      sol.gradient_mapping = r.mapping;

      const std::vector<double> y = Aggregates(q, z);
      double violation = 0.0;
      bool small_update = true;
      for (std::size_t k = 0; k < q.equalities.size(); ++k) {
        const double v = RowValue(q.equalities[k], y);
        const double tol = row_tolerance(q.equalities[k]);
        violation = std::max(violation, std::abs(v) / tol);
        const double s = aug.eq_scale[k];
        aug.eq_multipliers[k] += aug.penalty * v / s;
        if (std::abs(v) > tol) small_update = false;
      }
      for (std::size_t k = 0; k < q.inequalities.size(); ++k) {
        const double v = RowValue(q.inequalities[k], y);
        const double tol = row_tolerance(q.inequalities[k]);
        violation = std::max(violation, std::max(0.0, v) / tol);
        const double s = aug.ineq_scale[k];
        const double before = aug.ineq_multipliers[k];
        aug.ineq_multipliers[k] = std::max(0.0, before + aug.penalty * v / s);
        // Multiplier movement expressed in row units (kW).
        const double moved =
            std::abs(aug.ineq_multipliers[k] - before) * s / aug.penalty;
        if (moved > tol) small_update = false;
      }
      if (r.converged && violation <= 1.0 && small_update) {
        sol.converged = true;
        break;
      }
      if (violation > 0.25 * previous_violation) {
        aug.penalty =
            std::min(options.max_penalty, aug.penalty * options.penalty_growth);
      }
      previous_violation = violation;
    }
  }

  sol.variables = z;
  sol.decisions = DecisionsFromVariables(q, z);
  sol.uncleared = Aggregates(q, z);
  for (std::size_t r = 0; r < q.equalities.size(); ++r) {
    sol.eq_multipliers.push_back(aug.eq_multipliers[r] / aug.eq_scale[r]);
  }
  for (std::size_t r = 0; r < q.inequalities.size(); ++r) {
    sol.ineq_multipliers.push_back(aug.ineq_multipliers[r] /
                                   aug.ineq_scale[r]);
  }
  const std::vector<double> pull =
      RowPull(q, sol.eq_multipliers, sol.ineq_multipliers);
  sol.shadow.resize(q.prosumers.size());
  for (std::size_t i = 0; i < q.communities.size(); ++i) {
    const QpCommunity& c = q.communities[i];
    for (std::size_t j = c.first; j < c.first + c.count; ++j) {
      sol.shadow[j] = -(c.linear_x + c.agg_quad * sol.uncleared[i] + pull[i] +
                        c.indiv_quad * sol.decisions[j].shared);
    }
  }
  sol.objective = QpObjective(q, z);
  for (std::size_t j = 0; j < q.prosumers.size(); ++j) {
    sol.system_cost += SystemCost(q.prosumers[j], q.tariff, sol.decisions[j]);
  }
  for (const auto& row : q.equalities) {
    sol.max_violation =
        std::max(sol.max_violation, std::abs(RowValue(row, sol.uncleared)));
  }
  for (const auto& row : q.inequalities) {
    sol.max_violation =
        std::max(sol.max_violation, RowValue(row, sol.uncleared));
  }
  return sol;
}

double QpKktReport::Max() const {
  return std::max({stationarity, feasibility, sign, complementarity});
}

QpKktReport CheckQpKkt(const QpProblem& q, const QpSolution& sol) {
  QpKktReport r;
  const std::vector<double>& z = sol.variables;
  const std::vector<double> y = Aggregates(q, z);
  const std::vector<double> pull =
      RowPull(q, sol.eq_multipliers, sol.ineq_multipliers);
  std::vector<double> g(z.size());
  GradientWithPull(q, z, y, pull, g);
  // Unit step keeps the residual in currency per kW.
  r.stationarity = GradientMapping(q, z, g, 1.0);
  for (std::size_t k = 0; k < z.size(); ++k) {
    r.sign = std::max({r.sign, LowerBound(q, k) - z[k], z[k] - UpperBound(q, k)});
  }
  for (const auto& row : q.equalities) {
    r.feasibility = std::max(r.feasibility, std::abs(RowValue(row, y)));
  }
  for (std::size_t k = 0; k < q.inequalities.size(); ++k) {
    const double v = RowValue(q.inequalities[k], y);
    const double lam = sol.ineq_multipliers[k];
    r.feasibility = std::max(r.feasibility, v);
    r.sign = std::max(r.sign, -lam);
    r.complementarity = std::max(r.complementarity, std::abs(lam * v));
  }
  return r;
}

QpProblem BuildLamProblem(std::span<const ProsumerParams> members,
                          const UtilityTariff& tariff, double base_price,
                          double elasticity, bool utility_trading) {
  QpProblem q;
  q.prosumers.assign(members.begin(), members.end());
  q.tariff = tariff;
  q.utility_trading = utility_trading;
  q.communities.push_back(
      {0, members.size(), -base_price, elasticity, elasticity});
  return q;
}

LamQpSolution SolveLamQp(std::span<const ProsumerParams> members,
                         const UtilityTariff& tariff, double base_price,
                         double elasticity, const QpOptions& options,
                         bool utility_trading) {
  if (members.empty()) throw InputError("members: member list is empty");
  if (!(elasticity > 0.0)) throw InputError("elasticity must be > 0");
  const QpProblem q =
      BuildLamProblem(members, tariff, base_price, elasticity, utility_trading);
  const QpSolution sol = SolveQp(q, options);

  LamQpSolution out;
  out.decisions = sol.decisions;
  out.converged = sol.converged;
  out.iterations = sol.iterations;
  out.uncleared = sol.uncleared.front();
  out.price = base_price - elasticity * out.uncleared;
  out.objective = sol.objective;
  out.system_cost = sol.system_cost;
  out.multipliers.resize(members.size());
  for (std::size_t j = 0; j < members.size(); ++j) {
    const ProsumerParams& p = members[j];
    const ProsumerDecision& s = out.decisions[j];
    KktMultipliers& m = out.multipliers[j];
    m.shadow = sol.shadow[j];
    const double dp = p.cost_quad * s.generation + p.cost_lin - m.shadow;
    m.mu_lo = std::max(0.0, dp);
    m.mu_hi = std::max(0.0, -dp);
    if (utility_trading) {
      m.mu_buy = tariff.buy_price - m.shadow;
      m.mu_sell = m.shadow - tariff.sell_price;
    }
    out.prosumer_cost += ProsumerCost(p, tariff, s, out.price);
  }
  return out;
}

QpProblem BuildGlobalProblem(const Scenario& scenario, GlobalMode mode,
                             bool clear_each, bool utility_trading) {
  ThrowIfAny(ValidateScenario(scenario));
  QpProblem q;
  q.tariff = scenario.tariff;
  q.utility_trading = utility_trading;
  const std::size_t n = scenario.communities.size();
  for (const Community& c : scenario.communities) {
    QpCommunity qc;
    qc.first = q.prosumers.size();
    qc.count = c.members.size();
    if (mode == GlobalMode::kWithCompetitionLoss) {
      qc.agg_quad = c.elasticity;
      qc.indiv_quad = c.elasticity;
    }
    q.communities.push_back(qc);
    q.prosumers.insert(q.prosumers.end(), c.members.begin(), c.members.end());
  }
  if (clear_each) {
    for (std::size_t i = 0; i < n; ++i) {
      AggregateRow row{"clear_" + std::to_string(scenario.communities[i].id),
                       std::vector<double>(n, 0.0), 0.0};
      row.weights[i] = 1.0;
      q.equalities.push_back(std::move(row));
    }
    return q;
  }
  q.equalities.push_back({"balance", std::vector<double>(n, 1.0), 0.0});
  for (const NetworkRow& row : scenario.network.rows) {
    q.inequalities.push_back({row.label, row.sensitivity, row.limit});
  }
  return q;
}

GlobalQpSolution SolveGlobalQp(const Scenario& scenario, GlobalMode mode,
                               bool clear_each, const QpOptions& options,
                               bool utility_trading) {
  const QpProblem q =
      BuildGlobalProblem(scenario, mode, clear_each, utility_trading);
  const std::size_t n = scenario.communities.size();
  GlobalQpSolution out;
  out.decisions.resize(n);
  out.uncleared.assign(n, 0.0);

  if (clear_each) {
    // Independent per-community problems.
    std::vector<QpSolution> parts(n);
    std::vector<QpProblem> pieces(n);
    for (std::size_t i = 0; i < n; ++i) {
      const QpCommunity& c = q.communities[i];
      QpProblem& piece = pieces[i];
      piece.tariff = q.tariff;
      piece.utility_trading = q.utility_trading;
      piece.prosumers.assign(q.prosumers.begin() + c.first,
                             q.prosumers.begin() + c.first + c.count);
      QpCommunity local = c;
      local.first = 0;
      piece.communities.push_back(local);
      piece.equalities.push_back({q.equalities[i].label, {1.0}, 0.0});
    }
    WorkerPool pool(std::max<std::size_t>(1, options.threads));
    pool.ParallelFor(n, [&](std::size_t i) {
      parts[i] = SolveQp(pieces[i], options);
    });
    out.converged = true;
    for (std::size_t i = 0; i < n; ++i) {
      const QpSolution& s = parts[i];
      out.decisions[i] = s.decisions;
      out.uncleared[i] = s.uncleared.front();
      out.system_cost += s.system_cost;
      out.objective += s.objective;
      out.max_violation = std::max(out.max_violation, s.max_violation);
      out.converged = out.converged && s.converged;
      out.iterations += s.iterations;
      const QpKktReport k = CheckQpKkt(pieces[i], s);
      out.kkt.stationarity = std::max(out.kkt.stationarity, k.stationarity);
      out.kkt.feasibility = std::max(out.kkt.feasibility, k.feasibility);
      out.kkt.sign = std::max(out.kkt.sign, k.sign);
      out.kkt.complementarity =
          std::max(out.kkt.complementarity, k.complementarity);
    }
    return out;
  }

  const QpSolution s = SolveQp(q, options);
  for (std::size_t i = 0; i < n; ++i) {
    const QpCommunity& c = q.communities[i];
    out.decisions[i].assign(s.decisions.begin() + c.first,
                            s.decisions.begin() + c.first + c.count);
  }
  out.uncleared = s.uncleared;
  out.balance_multiplier = s.eq_multipliers.front();
  out.row_multipliers = s.ineq_multipliers;
  out.base_prices.assign(n, -out.balance_multiplier);
  for (std::size_t l = 0; l < out.row_multipliers.size(); ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      out.base_prices[i] -=
          scenario.network.rows[l].sensitivity[i] * out.row_multipliers[l];
    }
  }
  out.system_cost = s.system_cost;
  out.objective = s.objective;
  out.max_violation = s.max_violation;
  out.converged = s.converged;
  out.iterations = s.iterations;
  out.kkt = CheckQpKkt(q, s);
  return out;
}

RegimeCosts ComputeRegimeCosts(const Scenario& scenario,
                               const QpOptions& options) {
  ThrowIfAny(ValidateScenario(scenario));
  RegimeCosts costs;
  for (const Community& c : scenario.communities) {
    for (const ProsumerParams& p : c.members) {
      costs.self_sufficiency += OptOutCost(p, scenario.tariff);
    }
  }
  const GlobalQpSolution ls = SolveGlobalQp(
      scenario, GlobalMode::kWithCompetitionLoss, true, options);
  const GlobalQpSolution lo =
      SolveGlobalQp(scenario, GlobalMode::kSocialOptimum, true, options);
  const GlobalQpSolution wo =
      SolveGlobalQp(scenario, GlobalMode::kSocialOptimum, false, options);
  WamConfig config = WamConfig::FromScenario(scenario);
  config.threads = options.threads;
  const WamResult ws = ClearWam(scenario, config);

  costs.local_sharing = ls.system_cost;
  costs.local_optimum = lo.system_cost;
  costs.wide_sharing = ws.prosumer_cost;
  costs.wide_optimum = wo.system_cost;
  costs.wam_iterations = ws.iterations;
  costs.converged =
      ls.converged && lo.converged && wo.converged && ws.converged;
  return costs;
}

bool RegimeOrderingHolds(const RegimeCosts& c, double slack) {
  auto at_least = [slack](double hi, double lo) {
    return hi >= lo - slack * std::max(1.0, std::abs(lo));
  };
  return at_least(c.self_sufficiency, c.local_sharing) &&
         at_least(c.local_sharing, c.wide_sharing) &&
         at_least(c.wide_sharing, c.wide_optimum);
}

}  // namespace meshmarket
