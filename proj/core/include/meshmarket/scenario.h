#ifndef MESHMARKET_SCENARIO_H_
#define MESHMARKET_SCENARIO_H_

// Seeded instance generation, radial-feeder ingestion, line sensitivities
// and the JSON scenario file format.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <random>
#include <string>
#include <vector>

#include "meshmarket/model.h"

namespace meshmarket {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct TypeMix {
  double surplus = 0.35;
  double balance = 0.30;
  double deficit = 0.35;
};

// Forces the type of every community whose bus lies in [first_bus, last_bus].
struct TypeOverride {
  int first_bus = 0;
  int last_bus = 0;
  CommunityType type = CommunityType::kBalance;
};

struct ScenarioSpec {
  std::uint64_t seed = 1;
  UtilityTariff tariff{0.2, 0.05};
  // Community sizes are drawn from `community_size` and then rescaled so
  // they sum to this total; zero keeps the raw draws.
  std::size_t total_prosumers = 0;
  Range community_size{50, 525};
  TypeMix mix;
  std::vector<TypeOverride> type_overrides;
  Range cost_quad{0.5e-3, 1e-3};
  Range cost_lin{0.01, 0.05};
  Range demand{0, 40};
  double gen_min = 0.0;
  // Generation-capacity tiers, largest first.
  std::vector<Range> gen_max_tiers{{35, 50}, {20, 35}, {15, 25}, {5, 10},
                                   {0, 5}};
  // Community elasticity is U[elasticity] / community size.
  Range elasticity{2.5e-3, 5e-3};
  Topology topology;
  // Buses hosting a community, one community each; empty means every bus.
  std::vector<int> community_buses;
  std::vector<MonitoredLine> monitored_lines;
  SolverSettings solver;
};

std::vector<Violation> ValidateSpec(const ScenarioSpec& spec);

// Deterministic for a fixed spec. Every community draws from its own
// substream so adding a community never shifts the others' parameters.
Scenario Generate(const ScenarioSpec& spec);

// Uniform draws in [0, 1) from a 64-bit Mersenne twister seeded through
// splitmix64 of (seed, stream). Bit-identical across platforms.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t stream);
  double Uniform();
  double Uniform(const Range& range);

 private:
  std::mt19937_64 engine_;
};

// Tree checks: single root, every bus reached, no cycles.
std::vector<Violation> ValidateTopology(const Topology& topology);

// Two rows per monitored line: +indicator and -indicator of "community bus
// lies below the line", both limited by the line capacity.
NetworkModel SensitivitiesFromTree(const Topology& topology,
                                   const std::vector<MonitoredLine>& lines,
                                   const std::vector<Community>& communities);

// Whitespace-separated "parent child" pairs, one per line; '#' starts a
// comment. The bus count is the largest id seen.
Topology ReadEdgeList(std::istream& in);
Topology ReadEdgeListFile(const std::filesystem::path& path);

ScenarioSpec LoadSpec(const std::filesystem::path& path);
ScenarioSpec ParseSpec(const std::string& text,
                       const std::filesystem::path& base_dir = {});

std::string SerializeScenario(const Scenario& scenario);
Scenario ParseScenario(const std::string& text);
void SaveScenario(const Scenario& scenario, const std::filesystem::path& path);
Scenario LoadScenario(const std::filesystem::path& path);

// FNV-1a 64-bit of the serialized scenario, as 16 hex digits.
std::string Digest(const Scenario& scenario);

}  // namespace meshmarket

#endif  // MESHMARKET_SCENARIO_H_
