#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ni/ast.hpp"
#include "ni/autodiff.hpp"
#include "ni/model.hpp"

namespace ni {

enum class TraceOp { Guess, Store, Lookup, Lambda, PushCtx, PopCtx, PushScope, PopScope, Return };

const char* trace_op_name(TraceOp op);

struct TraceEvent {
  TraceOp op = TraceOp::Guess;
  std::string operands;
  int node_id = -1;
};

// `<seq>\t<op>\t<operands>` per line, seq from 0.
std::string format_trace(const std::vector<TraceEvent>& events);
// Readable commentary, one line per event, indented by scope.
std::string format_pseudocode(const std::vector<TraceEvent>& events);

enum class ObjectKind { Value, Function, Constant };
enum class CalleeKind { Builtin, Compiled, Guessed };

const char* callee_kind_name(CalleeKind kind);

struct AbstractObject {
  int id = -1;
  int origin_node = -1;
  ObjectKind kind = ObjectKind::Value;
  bool compiled = false;  // function object produced by __compile_function__
  bool contaminated = false;
  int view_of = -1;
  int producer = -1;  // record id for lambda results

  // Guess source: node whose donor span is pooled, plus the NodeKind whose
  // type embedding is added.
  int guess_node = -1;
  NodeKind guess_kind = NodeKind::Unsupported;
  bool function_default = false;

  ad::Var fixed;      // constants
  ad::Var executed;   // lambda results
  ad::Var guessed;    // lazily pooled
  bool has_executed() const { return producer >= 0; }
};

struct Variable {
  std::string name;
  std::vector<int> history;
  int current() const { return history.back(); }
};

struct Scope {
  std::string label;
  bool function = false;
  std::vector<std::string> order;  // names in first-store order
  std::unordered_map<std::string, Variable> table;
};

struct Callee {
  CalleeKind kind = CalleeKind::Builtin;
  std::string name;
  int builtin = -1;
  int object = -1;
};

struct LambdaRecord {
  int id = -1;
  int node_id = -1;
  Callee callee;
  std::vector<int> contexts;  // context objects, outermost first
  std::vector<int> args;
  int result = -1;
  ad::Var theta;
  ad::Var arg_outputs;
  int snapshot = -1;
};

// Visible value bindings at a call site, sorted by object id.
struct Snapshot {
  std::vector<std::pair<std::string, int>> bindings;  // one name per object
  std::vector<std::pair<std::string, int>> visible;   // every visible name, sorted by name
};

struct Assignment {
  int lhs_node = -1;
  std::string name;
  int object = -1;
};

// Receives executor requests issued by an interpreter. Implementations may
// defer and batch them; run() returns once the result is available.
class LambdaChannel {
 public:
  virtual ~LambdaChannel() = default;
  virtual ExecResult run(ExecRequest request) = 0;
};

// Runs each request immediately on its own.
class DirectChannel : public LambdaChannel {
 public:
  DirectChannel(const Model& model, ad::Tape& tape) : model_(model), tape_(tape) {}
  ExecResult run(ExecRequest request) override;
  long calls() const { return calls_; }

 private:
  const Model& model_;
  ad::Tape& tape_;
  long calls_ = 0;
};

struct InterpreterOptions {
  int max_args = 16;
  bool snapshots = false;
  int misuse_node = -1;  // Identifier node id whose lookup yields a contaminated view
};

struct NeuralContext {
  const Model* model = nullptr;
  ad::Tape* tape = nullptr;
  const Encoded* encoded = nullptr;
  LambdaChannel* channel = nullptr;
};

class Interpreter {
 public:
  // Without a neural context the interpreter runs structurally: objects,
  // records and the trace are produced, no vectors are computed.
  Interpreter(const SyntaxTree& tree, InterpreterOptions options = {}, NeuralContext neural = {});

  const SyntaxTree& tree() const { return tree_; }
  const InterpreterOptions& options() const { return options_; }
  bool neural() const { return neural_.model != nullptr; }

  // ---- NIS ----
  int guess(const AstNode& node, bool function = false);
  // Binds `name`'s current object, guessing and storing on first use.
  int lookup(const std::string& name, const AstNode& node, bool function = false);
  std::optional<int> peek(const std::string& name) const;
  void store(const std::string& name, int object, const AstNode& node);
  int lambda(const Callee& callee, std::vector<int> args, const AstNode& node);
  int builtin_lambda(const std::string& builtin, std::vector<int> args, const AstNode& node);

  // ---- structure ----
  void push_scope(const std::string& label, bool function, const AstNode& node);
  void pop_scope(const AstNode& node);
  void push_context(int object, const AstNode& node);
  void pop_context(const AstNode& node);
  void emit_return(int object, const AstNode& node);
  std::optional<int> return_value() const;
  int scope_depth() const { return static_cast<int>(scopes_.size()); }
  int context_depth() const { return static_cast<int>(contexts_.size()); }

  // ---- constants and views ----
  int none_constant();
  int unpack_index(int i);
  int contaminated_view(int original, const AstNode& node);

  // ---- results ----
  const std::vector<AbstractObject>& objects() const { return objects_; }
  const AbstractObject& object(int id) const { return objects_.at(static_cast<std::size_t>(id)); }
  const std::vector<LambdaRecord>& records() const { return records_; }
  const std::vector<TraceEvent>& trace() const { return trace_; }
  const std::vector<Snapshot>& snapshots() const { return snapshots_; }
  const std::vector<Assignment>& assignments() const { return assignments_; }
  const std::vector<Scope>& scopes() const { return scopes_; }
  void note_assignment(const AstNode& lhs, const std::string& name, int object);
  int peak_entries() const { return peak_entries_; }
  int live_entries() const;
  std::vector<std::pair<int, int>> view_edges() const;
  bool truncated() const { return truncated_; }
  void mark_truncated() { truncated_ = true; }
  // Marks a __compile_function__ result as a compiled function object.
  void mark_function(int object) {
    objects_.at(static_cast<std::size_t>(object)).kind = ObjectKind::Function;
    objects_.at(static_cast<std::size_t>(object)).compiled = true;
  }

  // ---- vectors (neural mode) ----
  ad::Var guessed(int object);
  // Pooled guess of an arbitrary node (cached per node).
  ad::Var node_guess(int node_id);
  ad::Var executed_or_guessed(int object);
  // (guessed, executed) pair fed to the executor; never-executed objects use (g, g).
  std::pair<ad::Var, ad::Var> argument_pair(int object);
  ad::Var theta(const Callee& callee);
  // Request that reproduces `record`; with `replace` set, argument
  // `replace->first` is swapped for object `replace->second`.
  ExecRequest request_for(const LambdaRecord& record, std::optional<std::pair<int, int>> replace = std::nullopt);

  // JSON memory dump of the live scopes.
  std::string memory_dump(bool with_vectors);

 private:
  int new_object(ObjectKind kind, int origin);
  void emit(TraceOp op, std::string operands, const AstNode& node);
  std::string guess_label(const AstNode& node) const;
  Span donor_span(const AstNode& node) const;

  const SyntaxTree& tree_;
  InterpreterOptions options_;
  NeuralContext neural_;
  std::vector<AbstractObject> objects_;
  std::vector<LambdaRecord> records_;
  std::vector<TraceEvent> trace_;
  std::vector<Snapshot> snapshots_;
  std::vector<Assignment> assignments_;
  std::vector<Scope> scopes_;
  std::vector<int> contexts_;
  std::unordered_map<int, ad::Var> guess_cache_;  // node id -> pooled vector
  int none_ = -1;
  std::map<int, int> unpack_;
  int entries_ = 0;
  int peak_entries_ = 0;
  bool truncated_ = false;
};

inline constexpr const char* kReturnName = "__return_val__";

bool is_reserved_name(const std::string& name);

}  // namespace ni
