#include "meshmarket/scenario.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"

namespace meshmarket {

namespace {

using nlohmann::json;

std::uint64_t SplitMix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  const std::uint64_t a = SplitMix64(s);
  std::uint64_t t = stream ^ a;
  return SplitMix64(t);
}

bool Ordered(const Range& r) {
  return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi;
}

void CheckRange(std::vector<Violation>& out, const Range& r,
                const std::string& path, double min_lo) {
  if (!Ordered(r)) {
    out.push_back({path, "range must be finite with lo <= hi"});
  } else if (r.lo < min_lo) {
    out.push_back({path, "range lower end below " + std::to_string(min_lo)});
  }
}

CommunityType DrawType(double u, const TypeMix& mix) {
  if (u < mix.surplus) return CommunityType::kSurplus;
  if (u < mix.surplus + mix.balance) return CommunityType::kBalance;
  return CommunityType::kDeficit;
}

std::size_t DrawTier(double u, CommunityType type, std::size_t num_tiers) {
  const std::size_t last = num_tiers - 1;
  switch (type) {
    case CommunityType::kSurplus:
      return u < 0.8 ? 0 : std::min<std::size_t>(1, last);
    case CommunityType::kDeficit:
      return u < 0.8 ? last : (last > 0 ? last - 1 : 0);
    case CommunityType::kBalance:
      break;
  }
  return std::min(last, static_cast<std::size_t>(u * num_tiers));
}

// Sizes scaled to `total` with largest-remainder rounding, at least 1 each.
std::vector<std::size_t> Rescale(const std::vector<std::size_t>& raw,
                                 std::size_t total) {
  if (total == 0) return raw;
  double sum = 0.0;
  for (std::size_t n : raw) sum += static_cast<double>(n);
  std::vector<std::size_t> out(raw.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double exact = static_cast<double>(raw[i]) * total / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    remainders.push_back({exact - std::floor(exact), i});
    assigned += out[i];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k) {
    ++out[remainders[k].second];
    ++assigned;
  }
  for (std::size_t& n : out) n = std::max<std::size_t>(n, 1);
  return out;
}

// Children lists indexed by bus id (1-based; index 0 unused).
std::vector<std::vector<int>> Children(const Topology& topology) {
  std::vector<std::vector<int>> children(topology.num_buses + 1);
  for (const auto& [parent, child] : topology.edges) {
    children.at(parent).push_back(child);
  }
  return children;
}

// ---- JSON helpers --------------------------------------------------------

[[noreturn]] void SchemaError(const std::string& path,
                              const std::string& reason) {
  throw InputError(path + ": " + reason);
}

const json& Field(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) SchemaError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) SchemaError(path + "." + key, "missing required field");
  return *it;
}

double Number(const json& j, const std::string& path) {
  if (!j.is_number()) SchemaError(path, "expected a number");
  return j.get<double>();
}

double NumberField(const json& j, const std::string& path, const char* key) {
  return Number(Field(j, path, key), path + "." + key);
}

long long IntegerField(const json& j, const std::string& path,
                       const char* key) {
  const json& v = Field(j, path, key);
  if (!v.is_number_integer()) SchemaError(path + "." + key, "expected an integer");
  return v.get<long long>();
}

std::string StringField(const json& j, const std::string& path,
                        const char* key) {
  const json& v = Field(j, path, key);
  if (!v.is_string()) SchemaError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

const json& ArrayField(const json& j, const std::string& path,
                       const char* key) {
  const json& v = Field(j, path, key);
  if (!v.is_array()) SchemaError(path + "." + key, "expected an array");
  return v;
}

template <typename T>
void Optional(const json& j, const std::string& path, const char* key,
              T& target) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  const std::string at = path + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) SchemaError(at, "expected a boolean");
    target = it->get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) SchemaError(at, "expected an integer");
    target = it->get<T>();
  } else {
    target = Number(*it, at);
  }
}

Range ParseRange(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) {
    SchemaError(path, "expected [lo, hi]");
  }
  return {Number(j[0], path + "[0]"), Number(j[1], path + "[1]")};
}

json Parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const long line =
        1 + std::count(text.begin(), text.begin() + static_cast<long>(upto),
                       '\n');
    throw InputError(what + ": parse error at line " + std::to_string(line) +
                     ": " + e.what());
  }
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

UtilityTariff ParseTariff(const json& j, const std::string& path) {
  return {NumberField(j, path, "buy_price"), NumberField(j, path, "sell_price")};
}

json TariffJson(const UtilityTariff& t) {
  return {{"buy_price", t.buy_price}, {"sell_price", t.sell_price}};
}

SolverSettings ParseSolver(const json& j, const std::string& path) {
  SolverSettings s;
  if (!j.is_object()) SchemaError(path, "expected an object");
  Optional(j, path, "balance_step", s.balance_step);
  Optional(j, path, "congestion_step", s.congestion_step);
  Optional(j, path, "wam_tolerance", s.wam_tolerance);
  Optional(j, path, "wam_max_iters", s.wam_max_iters);
  Optional(j, path, "diminishing_steps", s.diminishing_steps);
  if (const auto it = j.find("initial_balance_price");
      it != j.end() && !it->is_null()) {
    s.initial_balance_price = Number(*it, path + ".initial_balance_price");
  }
  Optional(j, path, "lam_tolerance", s.lam_tolerance);
  Optional(j, path, "lam_step", s.lam_step);
  Optional(j, path, "lam_max_iters", s.lam_max_iters);
  Optional(j, path, "adaptive_halving", s.adaptive_halving);
  Optional(j, path, "halving_threshold", s.halving_threshold);
  Optional(j, path, "oscillation_ratio", s.oscillation_ratio);
  return s;
}

json SolverJson(const SolverSettings& s) {
  json j = {{"balance_step", s.balance_step},
            {"congestion_step", s.congestion_step},
            {"wam_tolerance", s.wam_tolerance},
            {"wam_max_iters", s.wam_max_iters},
            {"diminishing_steps", s.diminishing_steps},
            {"initial_balance_price", nullptr},
            {"lam_tolerance", s.lam_tolerance},
            {"lam_step", s.lam_step},
            {"lam_max_iters", s.lam_max_iters},
            {"adaptive_halving", s.adaptive_halving},
            {"halving_threshold", s.halving_threshold},
            {"oscillation_ratio", s.oscillation_ratio}};
  if (!std::isnan(s.initial_balance_price)) {
    j["initial_balance_price"] = s.initial_balance_price;
  }
  return j;
}

std::vector<MonitoredLine> ParseLines(const json& j, const std::string& path) {
  if (!j.is_array()) SchemaError(path, "expected an array");
  std::vector<MonitoredLine> lines;
  for (std::size_t l = 0; l < j.size(); ++l) {
    const std::string at = path + "[" + std::to_string(l) + "]";
    MonitoredLine line;
    line.from = static_cast<int>(IntegerField(j[l], at, "from"));
    line.to = static_cast<int>(IntegerField(j[l], at, "to"));
    line.capacity_kw = 1000.0 * NumberField(j[l], at, "capacity_mw");
    lines.push_back(line);
  }
  return lines;
}

Topology ParseTopology(const json& j, const std::string& path) {
  Topology t;
  t.num_buses = static_cast<int>(IntegerField(j, path, "num_buses"));
  const json& edges = ArrayField(j, path, "edges");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::string at = path + ".edges[" + std::to_string(e) + "]";
    if (!edges[e].is_array() || edges[e].size() != 2 ||
        !edges[e][0].is_number_integer() || !edges[e][1].is_number_integer()) {
      SchemaError(at, "expected [parent, child]");
    }
    t.edges.push_back({edges[e][0].get<int>(), edges[e][1].get<int>()});
  }
  return t;
}

}  // namespace

// ---- RNG -----------------------------------------------------------------

StreamRng::StreamRng(std::uint64_t seed, std::uint64_t stream)
    : engine_(MixSeed(seed, stream)) {}

double StreamRng::Uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double StreamRng::Uniform(const Range& range) {
  return range.lo + (range.hi - range.lo) * Uniform();
}

// ---- Spec and generation -------------------------------------------------

std::vector<Violation> ValidateSpec(const ScenarioSpec& spec) {
  std::vector<Violation> out = Validate(spec.tariff, "tariff");
  CheckRange(out, spec.community_size, "community_size", 1.0);
  CheckRange(out, spec.cost_quad, "cost_quad", 0.0);
  if (Ordered(spec.cost_quad) && !(spec.cost_quad.lo > 0.0)) {
    out.push_back({"cost_quad", "quadratic cost must be > 0"});
  }
  CheckRange(out, spec.cost_lin, "cost_lin", -1e300);
  CheckRange(out, spec.demand, "demand", 0.0);
  CheckRange(out, spec.elasticity, "elasticity", 0.0);
  if (Ordered(spec.elasticity) && !(spec.elasticity.lo > 0.0)) {
    out.push_back({"elasticity", "elasticity must be > 0"});
  }
  if (spec.gen_max_tiers.empty()) {
    out.push_back({"gen_max_tiers", "at least one tier required"});
  }
  for (std::size_t k = 0; k < spec.gen_max_tiers.size(); ++k) {
    const std::string path = "gen_max_tiers[" + std::to_string(k) + "]";
    CheckRange(out, spec.gen_max_tiers[k], path, spec.gen_min);
  }
  const TypeMix& m = spec.mix;
  if (m.surplus < 0.0 || m.balance < 0.0 || m.deficit < 0.0 ||
      std::abs(m.surplus + m.balance + m.deficit - 1.0) > 1e-9) {
    out.push_back({"mix", "fractions must be >= 0 and sum to 1"});
  }
  for (std::size_t k = 0; k < spec.type_overrides.size(); ++k) {
    const TypeOverride& o = spec.type_overrides[k];
    if (o.first_bus > o.last_bus) {
      out.push_back({"type_overrides[" + std::to_string(k) + "]",
                     "first bus exceeds last bus"});
    }
  }
  for (auto& v : ValidateTopology(spec.topology)) {
    v.path = "topology" + (v.path.empty() ? "" : "." + v.path);
    out.push_back(std::move(v));
  }
  std::set<int> seen;
  for (int bus : spec.community_buses) {
    if (bus < 1 || bus > spec.topology.num_buses) {
      out.push_back({"community_buses", "bus " + std::to_string(bus) +
                                            " not in topology"});
    }
    if (!seen.insert(bus).second) {
      out.push_back({"community_buses",
                     "bus " + std::to_string(bus) + " listed twice"});
    }
  }
  return out;
}

Scenario Generate(const ScenarioSpec& spec) {
  ThrowIfAny(ValidateSpec(spec));
  std::vector<int> buses = spec.community_buses;
  if (buses.empty()) {
    for (int b = 1; b <= spec.topology.num_buses; ++b) buses.push_back(b);
  }

  // Header draws per community: size, type, elasticity. Community ids are
  // the bus ids, which also key the substreams.
  struct Draft {
    CommunityType type;
    double elasticity_draw;
    std::size_t raw_size;
  };
  std::vector<StreamRng> streams;
  std::vector<Draft> drafts;
  for (int bus : buses) {
    streams.emplace_back(spec.seed, static_cast<std::uint64_t>(bus));
    StreamRng& rng = streams.back();
    const double lo = std::ceil(spec.community_size.lo);
    const double hi = std::floor(spec.community_size.hi);
    const double size =
        lo + std::floor(rng.Uniform() * (std::max(hi, lo) - lo + 1.0));
    Draft d;
    d.raw_size = static_cast<std::size_t>(std::min(size, std::max(hi, lo)));
    d.type = DrawType(rng.Uniform(), spec.mix);
    for (const TypeOverride& o : spec.type_overrides) {
      if (bus >= o.first_bus && bus <= o.last_bus) d.type = o.type;
    }
    d.elasticity_draw = rng.Uniform(spec.elasticity);
    drafts.push_back(d);
  }
  std::vector<std::size_t> raw;
  for (const Draft& d : drafts) raw.push_back(d.raw_size);
  const std::vector<std::size_t> sizes = Rescale(raw, spec.total_prosumers);

  Scenario s;
  s.seed = spec.seed;
  s.tariff = spec.tariff;
  s.topology = spec.topology;
  s.monitored_lines = spec.monitored_lines;
  s.solver = spec.solver;
  const std::size_t tiers = spec.gen_max_tiers.size();
  for (std::size_t i = 0; i < buses.size(); ++i) {
    StreamRng& rng = streams[i];
    Community c;
    c.id = buses[i];
    c.bus = buses[i];
    c.type = drafts[i].type;
    c.elasticity = drafts[i].elasticity_draw / static_cast<double>(sizes[i]);
    for (std::size_t j = 0; j < sizes[i]; ++j) {
      ProsumerParams p;
      p.cost_quad = rng.Uniform(spec.cost_quad);
      p.cost_lin = rng.Uniform(spec.cost_lin);
      p.demand = rng.Uniform(spec.demand);
      p.gen_min = spec.gen_min;
      const Range& tier =
          spec.gen_max_tiers[DrawTier(rng.Uniform(), c.type, tiers)];
      p.gen_max = std::max(p.gen_min, rng.Uniform(tier));
      c.members.push_back(p);
    }
    s.communities.push_back(std::move(c));
  }
  s.network = SensitivitiesFromTree(s.topology, s.monitored_lines, s.communities);
  ThrowIfAny(ValidateScenario(s));
  return s;
}

// ---- Topology ------------------------------------------------------------

std::vector<Violation> ValidateTopology(const Topology& t) {
  std::vector<Violation> out;
  if (t.num_buses < 1) {
    out.push_back({"num_buses", "topology needs at least one bus"});
    return out;
  }
  std::vector<int> parents(t.num_buses + 1, 0);
  for (std::size_t e = 0; e < t.edges.size(); ++e) {
    const auto [parent, child] = t.edges[e];
    const std::string path = "edges[" + std::to_string(e) + "]";
    if (parent < 1 || parent > t.num_buses || child < 1 ||
        child > t.num_buses) {
      out.push_back({path, "bus id out of range"});
      continue;
    }
    if (parent == child) {
      out.push_back({path, "self loop"});
      continue;
    }
    if (++parents[child] > 1) {
      out.push_back({path, "bus " + std::to_string(child) +
                               " has more than one parent"});
    }
  }
  if (!out.empty()) return out;
  std::vector<int> roots;
  for (int b = 1; b <= t.num_buses; ++b) {
    if (parents[b] == 0) roots.push_back(b);
  }
  if (roots.size() != 1) {
    out.push_back({"edges", "expected a single root, found " +
                                std::to_string(roots.size())});
    return out;
  }
  const auto children = Children(t);
  std::vector<bool> seen(t.num_buses + 1, false);
  std::queue<int> frontier;
  frontier.push(roots.front());
  seen[roots.front()] = true;
  int reached = 1;
  while (!frontier.empty()) {
    const int b = frontier.front();
    frontier.pop();
    for (int c : children[b]) {
      if (seen[c]) continue;
      seen[c] = true;
      ++reached;
      frontier.push(c);
    }
  }
  if (reached != t.num_buses) {
    out.push_back({"edges", "not connected: " + std::to_string(reached) +
                                " of " + std::to_string(t.num_buses) +
                                " buses reachable from the root"});
  }
  return out;
}

NetworkModel SensitivitiesFromTree(const Topology& topology,
                                   const std::vector<MonitoredLine>& lines,
                                   const std::vector<Community>& communities) {
  {
    auto v = ValidateTopology(topology);
    for (auto& e : v) e.path = "topology." + e.path;
    ThrowIfAny(v);
  }
  for (std::size_t i = 0; i < communities.size(); ++i) {
    const int bus = communities[i].bus;
    if (bus < 1 || bus > topology.num_buses) {
      throw InputError("communities[" + std::to_string(i) + "].bus: bus " +
                       std::to_string(bus) + " not in topology");
    }
  }
  const auto children = Children(topology);
  std::set<std::pair<int, int>> directed(topology.edges.begin(),
                                         topology.edges.end());
  NetworkModel model;
  for (const MonitoredLine& line : lines) {
    int below = 0;
    if (directed.count({line.from, line.to})) {
      below = line.to;
    } else if (directed.count({line.to, line.from})) {
      below = line.from;
    } else {
      throw InputError("monitored line " + std::to_string(line.from) + "-" +
                       std::to_string(line.to) + " is not an edge");
    }
    std::vector<bool> downstream(topology.num_buses + 1, false);
    std::queue<int> frontier;
    frontier.push(below);
    downstream[below] = true;
    while (!frontier.empty()) {
      const int b = frontier.front();
      frontier.pop();
      for (int c : children[b]) {
        downstream[c] = true;
        frontier.push(c);
      }
    }
    NetworkRow out_row, in_row;
    const std::string name =
        std::to_string(line.from) + "-" + std::to_string(line.to);
    out_row.label = name + ":out";
    in_row.label = name + ":in";
    out_row.limit = in_row.limit = line.capacity_kw;
    for (const Community& c : communities) {
      const double pi = downstream[c.bus] ? 1.0 : 0.0;
      out_row.sensitivity.push_back(pi);
      in_row.sensitivity.push_back(-pi);
    }
    model.rows.push_back(std::move(out_row));
    model.rows.push_back(std::move(in_row));
  }
  return model;
}

Topology ReadEdgeList(std::istream& in) {
  Topology t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream fields(line);
    int parent = 0, child = 0;
    if (!(fields >> parent)) continue;
    std::string rest;
    if (!(fields >> child) || (fields >> rest)) {
      throw InputError("edge list line " + std::to_string(line_no) +
                       ": expected \"parent child\"");
    }
    if (parent < 1 || child < 1) {
      throw InputError("edge list line " + std::to_string(line_no) +
                       ": bus ids are 1-based");
    }
    t.edges.push_back({parent, child});
    t.num_buses = std::max({t.num_buses, parent, child});
  }
  if (t.edges.empty()) t.num_buses = 1;
  return t;
}

Topology ReadEdgeListFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return ReadEdgeList(in);
}

// ---- Spec file -----------------------------------------------------------

ScenarioSpec ParseSpec(const std::string& text,
                       const std::filesystem::path& base_dir) {
  const json j = Parse(text, "spec");
  const std::string root = "spec";
  if (!j.is_object()) SchemaError(root, "expected an object");
  ScenarioSpec spec;
  spec.seed = static_cast<std::uint64_t>(IntegerField(j, root, "seed"));
  spec.tariff = ParseTariff(Field(j, root, "tariff"), root + ".tariff");
  Optional(j, root, "total_prosumers", spec.total_prosumers);
  auto range = [&](const char* key, Range& target) {
    if (const auto it = j.find(key); it != j.end()) {
      target = ParseRange(*it, root + "." + key);
    }
  };
  range("community_size", spec.community_size);
  range("cost_quad", spec.cost_quad);
  range("cost_lin", spec.cost_lin);
  range("demand", spec.demand);
  range("elasticity", spec.elasticity);
  Optional(j, root, "gen_min", spec.gen_min);
  if (const auto it = j.find("gen_max_tiers"); it != j.end()) {
    if (!it->is_array()) SchemaError(root + ".gen_max_tiers", "expected an array");
    spec.gen_max_tiers.clear();
    for (std::size_t k = 0; k < it->size(); ++k) {
      spec.gen_max_tiers.push_back(ParseRange(
          (*it)[k], root + ".gen_max_tiers[" + std::to_string(k) + "]"));
    }
  }
  if (const auto it = j.find("mix"); it != j.end()) {
    const std::string at = root + ".mix";
    spec.mix = {NumberField(*it, at, "surplus"), NumberField(*it, at, "balance"),
                NumberField(*it, at, "deficit")};
  }
  if (const auto it = j.find("type_overrides"); it != j.end()) {
    if (!it->is_array()) SchemaError(root + ".type_overrides", "expected an array");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const std::string at = root + ".type_overrides[" + std::to_string(k) + "]";
      const Range buses = ParseRange(Field((*it)[k], at, "buses"), at + ".buses");
      TypeOverride o;
      o.first_bus = static_cast<int>(buses.lo);
      o.last_bus = static_cast<int>(buses.hi);
      try {
        o.type = CommunityTypeFromString(StringField((*it)[k], at, "type"));
      } catch (const InputError& e) {
        SchemaError(at + ".type", e.what());
      }
      spec.type_overrides.push_back(o);
    }
  }
  if (const auto it = j.find("topology_file"); it != j.end()) {
    if (!it->is_string()) SchemaError(root + ".topology_file", "expected a string");
    spec.topology = ReadEdgeListFile(base_dir / it->get<std::string>());
  } else if (const auto jt = j.find("topology"); jt != j.end()) {
    spec.topology = ParseTopology(*jt, root + ".topology");
  } else {
    SchemaError(root + ".topology_file", "missing required field");
  }
  if (const auto it = j.find("community_buses"); it != j.end()) {
    if (!it->is_array()) SchemaError(root + ".community_buses", "expected an array");
    for (const auto& b : *it) {
      if (!b.is_number_integer()) {
        SchemaError(root + ".community_buses", "expected integers");
      }
      spec.community_buses.push_back(b.get<int>());
    }
  }
  if (const auto it = j.find("monitored_lines"); it != j.end()) {
    spec.monitored_lines = ParseLines(*it, root + ".monitored_lines");
  }
  if (const auto it = j.find("solver"); it != j.end()) {
    spec.solver = ParseSolver(*it, root + ".solver");
  }
  return spec;
}

ScenarioSpec LoadSpec(const std::filesystem::path& path) {
  return ParseSpec(ReadFile(path), path.parent_path());
}

// ---- Scenario file -------------------------------------------------------

std::string SerializeScenario(const Scenario& s) {
  json j;
  j["version"] = s.version;
  j["seed"] = s.seed;
  j["tariff"] = TariffJson(s.tariff);
  json communities = json::array();
  json prosumers = json::array();
  for (const Community& c : s.communities) {
    communities.push_back({{"id", c.id},
                           {"bus", c.bus},
                           {"type", ToString(c.type)},
                           {"elasticity", c.elasticity},
                           {"num_prosumers", c.members.size()}});
    for (const ProsumerParams& p : c.members) {
      prosumers.push_back({{"community", c.id},
                           {"cost_quad", p.cost_quad},
                           {"cost_lin", p.cost_lin},
                           {"demand", p.demand},
                           {"gen_min", p.gen_min},
                           {"gen_max", p.gen_max}});
    }
  }
  j["communities"] = std::move(communities);
  j["prosumers"] = std::move(prosumers);
  json edges = json::array();
  for (const auto& [parent, child] : s.topology.edges) {
    edges.push_back({parent, child});
  }
  j["topology"] = {{"num_buses", s.topology.num_buses}, {"edges", edges}};
  json lines = json::array();
  for (const MonitoredLine& l : s.monitored_lines) {
    lines.push_back(
        {{"from", l.from}, {"to", l.to}, {"capacity_mw", l.capacity_kw / 1000.0}});
  }
  j["monitored_lines"] = std::move(lines);
  j["solver"] = SolverJson(s.solver);
  return j.dump(1);
}

Scenario ParseScenario(const std::string& text) {
  const json j = Parse(text, "scenario");
  const std::string root = "scenario";
  if (!j.is_object()) SchemaError(root, "expected an object");
  Scenario s;
  s.version = static_cast<int>(IntegerField(j, root, "version"));
  if (s.version != kScenarioVersion) {
    SchemaError(root + ".version", "unsupported version " +
                                       std::to_string(s.version));
  }
  {
    const json& seed = Field(j, root, "seed");
    if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
      SchemaError(root + ".seed", "expected an integer");
    }
    s.seed = seed.get<std::uint64_t>();
  }
  s.tariff = ParseTariff(Field(j, root, "tariff"), root + ".tariff");

  const json& communities = ArrayField(j, root, "communities");
  std::map<long long, std::size_t> index;
  for (std::size_t i = 0; i < communities.size(); ++i) {
    const std::string at = root + ".communities[" + std::to_string(i) + "]";
    Community c;
    c.id = static_cast<int>(IntegerField(communities[i], at, "id"));
    c.bus = static_cast<int>(IntegerField(communities[i], at, "bus"));
    c.elasticity = NumberField(communities[i], at, "elasticity");
    try {
      c.type = CommunityTypeFromString(StringField(communities[i], at, "type"));
    } catch (const InputError& e) {
      SchemaError(at + ".type", e.what());
    }
    index[c.id] = i;
    s.communities.push_back(std::move(c));
  }
  const json& prosumers = ArrayField(j, root, "prosumers");
  for (std::size_t k = 0; k < prosumers.size(); ++k) {
    const std::string at = root + ".prosumers[" + std::to_string(k) + "]";
    const long long id = IntegerField(prosumers[k], at, "community");
    const auto it = index.find(id);
    if (it == index.end()) SchemaError(at + ".community", "unknown community");
    ProsumerParams p;
    p.cost_quad = NumberField(prosumers[k], at, "cost_quad");
    p.cost_lin = NumberField(prosumers[k], at, "cost_lin");
    p.demand = NumberField(prosumers[k], at, "demand");
    p.gen_min = NumberField(prosumers[k], at, "gen_min");
    p.gen_max = NumberField(prosumers[k], at, "gen_max");
    s.communities[it->second].members.push_back(p);
  }
  for (std::size_t i = 0; i < communities.size(); ++i) {
    if (const auto it = communities[i].find("num_prosumers");
        it != communities[i].end() && it->is_number_integer() &&
        it->get<std::size_t>() != s.communities[i].members.size()) {
      SchemaError(root + ".communities[" + std::to_string(i) +
                      "].num_prosumers",
                  "does not match the prosumer list");
    }
  }
  s.topology = ParseTopology(Field(j, root, "topology"), root + ".topology");
  if (const auto it = j.find("monitored_lines"); it != j.end()) {
    s.monitored_lines = ParseLines(*it, root + ".monitored_lines");
  }
  if (const auto it = j.find("solver"); it != j.end()) {
    s.solver = ParseSolver(*it, root + ".solver");
  }
  ThrowIfAny(ValidateScenario(s));
  s.network =
      SensitivitiesFromTree(s.topology, s.monitored_lines, s.communities);
  return s;
}

void SaveScenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << SerializeScenario(scenario) << '\n';
  if (!out) throw InputError("write failed: " + path.string());
}

Scenario LoadScenario(const std::filesystem::path& path) {
  try {
    return ParseScenario(ReadFile(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string Digest(const Scenario& scenario) {
  const std::string text = SerializeScenario(scenario);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace meshmarket
