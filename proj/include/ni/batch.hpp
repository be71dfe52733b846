#pragma once

#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ni/ast.hpp"
#include "ni/interpreter.hpp"
#include "ni/model.hpp"

namespace ni {

struct BatchItem {
  const std::string* code = nullptr;
  long misuse_offset = -1;  // byte offset of the flagged identifier, -1 for none
};

enum class RunStatus { Ok, Truncated, CodegenError, NotStarted };

const char* run_status_name(RunStatus status);

struct ScriptRun {
  std::unique_ptr<SyntaxTree> tree;
  Encoded encoded;
  std::unique_ptr<Interpreter> interp;
  RunStatus status = RunStatus::NotStarted;
  std::string error;
  int misuse_node = -1;
  std::unordered_map<int, int> statement_counts;
  std::unordered_map<int, int> block_counts;

  bool usable() const { return status == RunStatus::Ok || status == RunStatus::Truncated; }
};

struct BatchOptions {
  int pool = 4;          // concurrent scripts
  long lambda_cap = 128;  // executor calls per batch
  bool serial = false;   // one script at a time, every call executed on its own
  int max_args = 16;
  bool snapshots = false;
};

struct BatchRun {
  std::vector<ScriptRun> scripts;
  long lambda_calls = 0;
  long forwards = 0;
  bool cap_reached = false;
};

// Parses, encodes and interprets a batch of scripts. In pooled mode up to
// `pool` scripts are in flight; each executor forward collates the pending
// requests of all live scripts, and a script that finishes hands its slot to
// the next unstarted one. Results are bit-identical to serial mode as long as
// the call cap is not reached.
BatchRun run_batch(const Model& model, ad::Tape& tape, std::span<const BatchItem> items, const BatchOptions& options);

// Resolves a byte offset to the Identifier node starting there, or -1.
int identifier_at(const SyntaxTree& tree, long offset);

}  // namespace ni
