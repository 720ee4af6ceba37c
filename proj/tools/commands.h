#ifndef MESHMARKET_TOOLS_COMMANDS_H_
#define MESHMARKET_TOOLS_COMMANDS_H_

// Subcommands of the meshmarket tool. Each returns a process exit code and
// writes human-readable output to `out` and diagnostics to `err`.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "meshmarket/oracle.h"

namespace meshmarket::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNotConverged = 3;
inline constexpr int kExitInconsistent = 4;

struct RunReport {
  std::string digest;
  std::optional<RegimeCosts> regimes;
  int wam_iterations = 0;
  bool wam_converged = false;
  int lams_not_converged = 0;
  double wall_seconds = 0.0;
  // Mean compute seconds of one community clearing and of one prosumer's
  // bids over the whole run.
  double seconds_per_lam = 0.0;
  double seconds_per_prosumer = 0.0;
  double mean_lam_iterations = 0.0;
  double min_sharing_price = 0.0;
  double max_sharing_price = 0.0;
  int prices_outside_band = 0;
  double sum_uncleared = 0.0;
  double max_row_violation = 0.0;
  double system_cost = 0.0;
  double prosumer_cost = 0.0;
  std::size_t threads = 1;
  std::vector<std::string> outputs;
};

std::string ReportJson(const RunReport& report);

struct GenOptions {
  std::filesystem::path spec;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
};

struct RunOptions {
  std::filesystem::path scenario;
  bool no_utility = false;
  std::filesystem::path trace_dir = ".";
  std::optional<int> max_iters;
  std::optional<double> eps;
  std::size_t threads = 0;
};

struct CompareOptions {
  std::filesystem::path scenario;
  std::optional<std::filesystem::path> csv;
  std::size_t threads = 0;
};

struct BidcurveOptions {
  std::filesystem::path scenario;
  int community = 0;
  // "lo:hi:points"
  std::string grid = "0:0.3:50";
  std::optional<std::filesystem::path> out;
};

int CmdGen(const GenOptions& options, std::ostream& out, std::ostream& err);
int CmdRun(const RunOptions& options, std::ostream& out, std::ostream& err);
int CmdCompare(const CompareOptions& options, std::ostream& out,
               std::ostream& err);
int CmdBidcurve(const BidcurveOptions& options, std::ostream& out,
                std::ostream& err);

// Parses argv and dispatches; used by main and by the tests.
int Main(int argc, const char* const* argv, std::ostream& out,
         std::ostream& err);

}  // namespace meshmarket::cli

#endif  // MESHMARKET_TOOLS_COMMANDS_H_
