#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ni/synth.hpp"

namespace ni {

enum class Origin { Ingested, Synthetic };

struct MisuseLabel {
  bool has_misuse = false;
  long byte_offset = -1;
  std::string correct_name;
};

struct Script {
  std::string id;  // 16 hex digits of the content hash
  std::string code;
  long char_count = 0;  // Unicode code points
  Origin origin = Origin::Ingested;
  std::optional<MisuseLabel> label;
  std::optional<SynthOracle> oracle;  // synthetic scripts only
};

std::string script_id(const std::string& code);
long utf8_length(const std::string& text);

Script make_script(std::string code, Origin origin = Origin::Ingested);
Script from_synth(const SynthScript& s, bool with_label);

struct LoadResult {
  std::vector<Script> scripts;
  std::vector<std::string> errors;  // one per unreadable file or bad line
};

// `path` is a directory (every *.py below it, sorted by path) or a JSON-lines
// file with {"code", "has_misuse"?, "misuse_byte_offset"?, "correct_name"?}.
LoadResult load_corpus(const std::string& path);

void write_corpus_jsonl(const std::string& path, const std::vector<Script>& scripts);

struct FilterReport {
  long total = 0;
  long too_long = 0;
  long codegen_error = 0;
  long misuse_label_error = 0;
  long retained = 0;
  double retained_pct = 0.0;
};

std::string to_json(const FilterReport& r);

struct ScriptStats {
  long chars = 0;
  long lambda_calls = -1;  // -1 when not lowered
  std::string drop_reason;  // empty when retained
};

struct FilterOptions {
  long max_chars = 10000;
  int max_args = 16;
};

struct FilterResult {
  std::vector<Script> retained;
  FilterReport report;
  std::vector<ScriptStats> stats;  // parallel to the input
};

// Drops scripts over max_chars, scripts whose structural lowering fails, and
// labelled misuse scripts whose label cannot be grounded in a call argument.
FilterResult apply_filters(const std::vector<Script>& scripts, const FilterOptions& options = {});

// `bin_start,bin_end,count` rows; bins of equal width from 0 to the maximum.
std::string histogram_csv(const std::vector<long>& values, long width);

}  // namespace ni

namespace ni {

class SyntaxTree;
class Interpreter;

// A misuse label resolved against a lowering of the script.
struct GroundedLabel {
  std::string error;  // empty when usable
  int misuse_node = -1;
  int view_object = -1;
  int source_record = -1;
  int arg_index = -1;
  int correct_object = -1;  // clean scripts: -1
  int correct_candidate = -1;  // index into the source call's snapshot bindings
  bool ok() const { return error.empty(); }
};

// Runs the structural lowering with snapshots. A usable misuse label names
// an identifier whose view is a direct argument of the first contaminated
// call, and the correct name is bound in that call's snapshot. Every usable
// script has at least one call.
GroundedLabel ground_label(const SyntaxTree& tree, const MisuseLabel& label, int max_args = 16);
// Same rules on an existing run made with snapshots and the label's misuse node.
GroundedLabel ground_run(const Interpreter& interp, const MisuseLabel& label);

}  // namespace ni
