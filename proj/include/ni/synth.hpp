#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace ni {

// Ground truth derived from the generator's own program representation,
// independently of the parser and code generator.
struct SynthOracle {
  int statement_count = 0;
  int object_count = 0;
  int record_count = 0;
  std::vector<std::pair<int, int>> dfg_edges;  // sorted, duplicates kept
  std::vector<std::string> bound_names;        // distinct names ever stored, sorted
  // Misuse scripts only.
  int source_record = -1;
  int misused_arg_index = -1;
  int misuse_object = -1;
  std::vector<int> contaminated;  // object ids reachable from the misuse object, sorted
};

struct SynthScript {
  std::string code;
  SynthOracle oracle;
  bool has_misuse = false;
  long misuse_offset = -1;
  std::string correct_name;
  std::string wrong_name;
};

struct SynthOptions {
  int min_statements = 8;
  int max_statements = 20;
  int max_themes = 3;
  bool allow_defs = true;
  bool allow_loops = true;
};

// Deterministic for a given (seed, options). Programs draw names from themed
// pools (temperatures, money, geometry, ...) so that names carry meaning.
std::vector<SynthScript> synthesize(std::uint64_t seed, int count, const SynthOptions& options = {});

// Half of the produced scripts (chosen by the RNG) carry one injected
// misuse: a call argument identifier swapped for another in-scope variable.
std::vector<SynthScript> synthesize_misuse(std::uint64_t seed, int count, const SynthOptions& options = {});

}  // namespace ni
