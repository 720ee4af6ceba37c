#include "commands.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "meshmarket/lam.h"
#include "meshmarket/parallel.h"
#include "meshmarket/scenario.h"
#include "meshmarket/wam.h"

namespace meshmarket::cli {

namespace {

using nlohmann::json;

// Bid curves are checked against this monotonicity slack before export.
constexpr double kBidCurveSlackKw = 1e-8;

std::ofstream OpenOutput(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

std::vector<double> ParseGrid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  for (std::string part; std::getline(in, part, ':');) parts.push_back(part);
  if (parts.size() != 3) throw InputError("grid: expected lo:hi:points");
  double lo = 0.0, hi = 0.0;
  long points = 0;
  try {
    std::size_t used = 0;
    lo = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument(parts[0]);
    hi = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument(parts[1]);
    points = std::stol(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument(parts[2]);
  } catch (const std::logic_error&) {
    throw InputError("grid: cannot parse \"" + text + "\"");
  }
  if (!(lo < hi) || points < 2) {
    throw InputError("grid: need lo < hi and at least 2 points");
  }
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (long k = 0; k < points; ++k) {
    grid[k] = lo + (hi - lo) * static_cast<double>(k) /
                       static_cast<double>(points - 1);
  }
  return grid;
}

std::string Kilo(double dollars) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << dollars / 1000.0;
  return s.str();
}

void PrintRegimes(std::ostream& out, const RegimeCosts& c) {
  out << "Total cost (k$)\n";
  out << std::left << std::setw(10) << "SS" << std::setw(10) << "LS"
      << std::setw(10) << "LO" << std::setw(10) << "WS" << std::setw(10)
      << "WO" << '\n';
  out << std::setw(10) << Kilo(c.self_sufficiency) << std::setw(10)
      << Kilo(c.local_sharing) << std::setw(10) << Kilo(c.local_optimum)
      << std::setw(10) << Kilo(c.wide_sharing) << std::setw(10)
      << Kilo(c.wide_optimum) << '\n'
      << std::right;
}

json LamResultsJson(const Scenario& scenario, const WamResult& result) {
  json lams = json::array();
  for (std::size_t i = 0; i < scenario.communities.size(); ++i) {
    const Community& c = scenario.communities[i];
    const LamResult& lam = result.lams[i];
    lams.push_back({{"id", c.id},
                    {"bus", c.bus},
                    {"num_prosumers", c.members.size()},
                    {"base_price", result.base_prices[i]},
                    {"sharing_price", lam.price},
                    {"uncleared", lam.uncleared},
                    {"iterations", lam.iterations},
                    {"converged", lam.converged},
                    {"final_step", lam.final_step}});
  }
  return {{"balance_price", result.balance_price},
          {"congestion_prices", result.congestion_prices},
          {"communities", std::move(lams)}};
}

template <typename Fn>
int Guard(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInconsistent;
  }
}

}  // namespace

std::string ReportJson(const RunReport& r) {
  json j = {{"digest", r.digest},
            {"wam_iterations", r.wam_iterations},
            {"wam_converged", r.wam_converged},
            {"lams_not_converged", r.lams_not_converged},
            {"timing",
             {{"wall_seconds", r.wall_seconds},
              {"seconds_per_lam", r.seconds_per_lam},
              {"seconds_per_prosumer", r.seconds_per_prosumer},
              {"mean_lam_iterations", r.mean_lam_iterations},
              {"threads", r.threads}}},
            {"sharing_price_min", r.min_sharing_price},
            {"sharing_price_max", r.max_sharing_price},
            {"prices_outside_band", r.prices_outside_band},
            {"sum_uncleared", r.sum_uncleared},
            {"max_row_violation", r.max_row_violation},
            {"system_cost", r.system_cost},
            {"prosumer_cost", r.prosumer_cost},
            {"outputs", r.outputs}};
  if (r.regimes) {
    const RegimeCosts& c = *r.regimes;
    j["regimes"] = {{"SS", c.self_sufficiency}, {"LS", c.local_sharing},
                    {"LO", c.local_optimum},    {"WS", c.wide_sharing},
                    {"WO", c.wide_optimum},     {"converged", c.converged}};
  }
  return j.dump(2);
}

int CmdGen(const GenOptions& options, std::ostream& out, std::ostream& err) {
  return Guard(err, [&] {
    ScenarioSpec spec = LoadSpec(options.spec);
    if (options.seed) spec.seed = *options.seed;
    const Scenario scenario = Generate(spec);
    SaveScenario(scenario, options.out);
    out << "communities " << scenario.communities.size() << '\n'
        << "prosumers " << scenario.NumProsumers() << '\n'
        << "network rows " << scenario.network.rows.size() << '\n'
        << "digest " << Digest(scenario) << '\n';
    return kExitOk;
  });
}

int CmdRun(const RunOptions& options, std::ostream& out, std::ostream& err) {
  return Guard(err, [&] {
    const Scenario scenario = LoadScenario(options.scenario);
    WamConfig config = WamConfig::FromScenario(scenario);
    if (options.max_iters) {
      if (*options.max_iters < 1) throw InputError("--max-iters must be >= 1");
      config.max_iters = *options.max_iters;
    }
    if (options.eps) {
      if (!(*options.eps > 0.0)) throw InputError("--eps must be > 0");
      config.tolerance = *options.eps;
    }
    config.lam.utility_trading = !options.no_utility;
    config.threads = ResolveThreadCount(options.threads);

    const WamResult result = ClearWam(scenario, config);

    RunReport report;
    report.digest = Digest(scenario);
    report.wam_iterations = result.iterations;
    report.wam_converged = result.converged;
    report.wall_seconds = result.wall_seconds;
    report.seconds_per_lam =
        result.lam_clearings > 0
            ? result.lam_seconds / static_cast<double>(result.lam_clearings)
            : 0.0;
    report.seconds_per_prosumer =
        result.SecondsPerProsumer(scenario.NumProsumers());
    report.mean_lam_iterations = result.MeanLamIterations();
    report.sum_uncleared = result.sum_uncleared;
    report.max_row_violation = result.max_row_violation;
    report.system_cost = result.system_cost;
    report.prosumer_cost = result.prosumer_cost;
    report.threads = config.threads;
    report.min_sharing_price = result.lams.front().price;
    report.max_sharing_price = result.lams.front().price;
    for (const LamResult& lam : result.lams) {
      report.min_sharing_price = std::min(report.min_sharing_price, lam.price);
      report.max_sharing_price = std::max(report.max_sharing_price, lam.price);
      if (lam.price < scenario.tariff.sell_price ||
          lam.price > scenario.tariff.buy_price) {
        ++report.prices_outside_band;
      }
      if (!lam.converged) ++report.lams_not_converged;
    }

    std::filesystem::create_directories(options.trace_dir);
    const auto trace_path = options.trace_dir / "wam_trace.csv";
    const auto lams_path = options.trace_dir / "lam_results.json";
    const auto summary_path = options.trace_dir / "summary.json";
    {
      auto f = OpenOutput(trace_path);
      WriteWamTraceCsv(f, scenario.network, result.trace);
    }
    {
      auto f = OpenOutput(lams_path);
      f << LamResultsJson(scenario, result).dump(2) << '\n';
    }
    report.outputs = {trace_path.string(), lams_path.string(),
                      summary_path.string()};
    {
      auto f = OpenOutput(summary_path);
      f << ReportJson(report) << '\n';
    }

    out << "digest " << report.digest << '\n'
        << "wam " << (result.converged ? "converged" : "NOT converged")
        << " after " << result.iterations << " iterations\n"
        << "sum y " << result.sum_uncleared << " kW, max row violation "
        << result.max_row_violation << " kW\n"
        << "sharing prices [" << report.min_sharing_price << ", "
        << report.max_sharing_price << "], " << report.prices_outside_band
        << " outside [" << scenario.tariff.sell_price << ", "
        << scenario.tariff.buy_price << "]\n"
        << "system cost " << Kilo(result.system_cost) << " k$, prosumer cost "
        << Kilo(result.prosumer_cost) << " k$\n"
        << "wall " << result.wall_seconds << " s, mean LAM iterations "
        << report.mean_lam_iterations << ", bid time per prosumer "
        << report.seconds_per_prosumer << " s\n";
    if (!result.converged) {
      err << "wide-area market did not converge within " << config.max_iters
          << " iterations\n";
      return kExitNotConverged;
    }
    return kExitOk;
  });
}

int CmdCompare(const CompareOptions& options, std::ostream& out,
               std::ostream& err) {
  return Guard(err, [&] {
    const Scenario scenario = LoadScenario(options.scenario);
    QpOptions qp;
    qp.threads = ResolveThreadCount(options.threads);
    const RegimeCosts costs = ComputeRegimeCosts(scenario, qp);
    if (options.csv) {
      auto f = OpenOutput(*options.csv);
      f << "SS,LS,LO,WS,WO\n" << std::setprecision(17)
        << costs.self_sufficiency << ',' << costs.local_sharing << ','
        << costs.local_optimum << ',' << costs.wide_sharing << ','
        << costs.wide_optimum << '\n';
    }
    PrintRegimes(out, costs);
    if (costs.local_optimum != 0.0) {
      out << "|LS-LO|/|LO| = "
          << std::abs(costs.local_sharing - costs.local_optimum) /
                 std::abs(costs.local_optimum)
          << '\n';
    }
    if (!costs.converged) {
      err << "a regime solve did not converge\n";
      return kExitNotConverged;
    }
    if (!RegimeOrderingHolds(costs)) {
      err << "regime ordering SS >= LS >= WS >= WO violated\n";
      return kExitInconsistent;
    }
    return kExitOk;
  });
}

int CmdBidcurve(const BidcurveOptions& options, std::ostream& out,
                std::ostream& err) {
  return Guard(err, [&] {
    const Scenario scenario = LoadScenario(options.scenario);
    const auto it = std::find_if(
        scenario.communities.begin(), scenario.communities.end(),
        [&](const Community& c) { return c.id == options.community; });
    if (it == scenario.communities.end()) {
      throw InputError("unknown community " +
                       std::to_string(options.community));
    }
    const std::vector<double> grid = ParseGrid(options.grid);
    WamConfig wam = WamConfig::FromScenario(scenario);
    LamConfig config = wam.lam;
    config.elasticity = it->elasticity;
    const std::vector<BidPoint> curve =
        SampleBidCurve(it->members, scenario.tariff, config, grid);

    std::ostringstream csv;
    csv << "base_price,uncleared,sharing_price,converged,iterations\n"
        << std::setprecision(17);
    double worst_drop = 0.0;
    for (std::size_t k = 0; k < curve.size(); ++k) {
      const BidPoint& p = curve[k];
      csv << p.base_price << ',' << p.uncleared << ',' << p.sharing_price << ','
          << (p.converged ? 1 : 0) << ',' << p.iterations << '\n';
      if (k > 0) {
        worst_drop = std::max(worst_drop, curve[k - 1].uncleared - p.uncleared);
      }
    }
    if (options.out) {
      auto f = OpenOutput(*options.out);
      f << csv.str();
    } else {
      out << csv.str();
    }
    if (worst_drop > kBidCurveSlackKw) {
      err << "bid curve decreases by " << worst_drop << " kW\n";
      return kExitInconsistent;
    }
    return kExitOk;
  });
}

int Main(int argc, const char* const* argv, std::ostream& out,
         std::ostream& err) {
  CLI::App app{"Two-layer energy-sharing market engine", "meshmarket"};
  app.require_subcommand(1);

  GenOptions gen;
  std::uint64_t seed = 0;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a scenario from a spec");
  gen_cmd->add_option("--spec", gen.spec, "Scenario spec (JSON)")->required();
  gen_cmd->add_option("--out", gen.out, "Scenario file to write")->required();
  auto* seed_opt = gen_cmd->add_option("--seed", seed, "Override the seed");

  RunOptions run;
  int max_iters = 0;
  double eps = 0.0;
  auto* run_cmd = app.add_subcommand("run", "Clear the wide-area market");
  run_cmd->add_option("scenario", run.scenario, "Scenario file")->required();
  run_cmd->add_flag("--no-utility", run.no_utility,
                    "Disable trading with the utility");
  run_cmd->add_option("--trace-dir", run.trace_dir, "Output directory");
  auto* iters_opt =
      run_cmd->add_option("--max-iters", max_iters, "Coordinator iteration cap");
  auto* eps_opt =
      run_cmd->add_option("--eps", eps, "Coordinator price tolerance");
  run_cmd->add_option("--threads", run.threads,
                      "Worker threads (0: all cores; MESHMARKET_THREADS wins)");

  CompareOptions compare;
  std::string csv;
  auto* cmp_cmd =
      app.add_subcommand("compare", "Total cost under the five regimes");
  cmp_cmd->add_option("scenario", compare.scenario, "Scenario file")->required();
  auto* csv_opt = cmp_cmd->add_option("--csv", csv, "CSV file to write");
  cmp_cmd->add_option("--threads", compare.threads, "Worker threads");

  BidcurveOptions bid;
  std::string bid_out;
  auto* bid_cmd =
      app.add_subcommand("bidcurve", "Sample a community's bid curve");
  bid_cmd->add_option("scenario", bid.scenario, "Scenario file")->required();
  bid_cmd->add_option("--community", bid.community, "Community id")->required();
  bid_cmd->add_option("--grid", bid.grid, "Base-price grid lo:hi:points");
  auto* bid_out_opt = bid_cmd->add_option("--out", bid_out, "CSV file to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitInput;
  }

  if (gen_cmd->parsed()) {
    if (*seed_opt) gen.seed = seed;
    return CmdGen(gen, out, err);
  }
  if (run_cmd->parsed()) {
    if (*iters_opt) run.max_iters = max_iters;
    if (*eps_opt) run.eps = eps;
    return CmdRun(run, out, err);
  }
  if (cmp_cmd->parsed()) {
    if (*csv_opt) compare.csv = csv;
    return CmdCompare(compare, out, err);
  }
  if (*bid_out_opt) bid.out = bid_out;
  return CmdBidcurve(bid, out, err);
}

}  // namespace meshmarket::cli
