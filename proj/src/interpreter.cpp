#include "ni/interpreter.hpp"

#include <algorithm>

#include "json.hpp"
#include "ni/builtins.hpp"
#include "ni/errors.hpp"

namespace ni {

const char* trace_op_name(TraceOp op) {
  switch (op) {
    case TraceOp::Guess: return "GUESS";
    case TraceOp::Store: return "STORE";
    case TraceOp::Lookup: return "LOOKUP";
    case TraceOp::Lambda: return "LAMBDA";
    case TraceOp::PushCtx: return "PUSH_CTX";
    case TraceOp::PopCtx: return "POP_CTX";
    case TraceOp::PushScope: return "PUSH_SCOPE";
    case TraceOp::PopScope: return "POP_SCOPE";
    case TraceOp::Return: return "RETURN";
  }
  return "?";
}

const char* callee_kind_name(CalleeKind kind) {
  switch (kind) {
    case CalleeKind::Builtin: return "builtin";
    case CalleeKind::Compiled: return "compiled";
    case CalleeKind::Guessed: return "guessed";
  }
  return "?";
}

std::string format_trace(const std::vector<TraceEvent>& events) {
  std::string out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    out += std::to_string(i);
    out += '\t';
    out += trace_op_name(events[i].op);
    out += '\t';
    out += events[i].operands;
    out += '\n';
  }
  return out;
}

std::string format_pseudocode(const std::vector<TraceEvent>& events) {
  std::string out;
  int depth = 0;
  auto words = [](const std::string& text) {
    std::vector<std::string> w;
    std::size_t i = 0;
    while (i < text.size()) {
      if (text[i] == '"') {
        std::size_t j = i + 1;
        while (j < text.size() && text[j] != '"') j += text[j] == '\\' ? 2 : 1;
        w.push_back(text.substr(i, j + 1 - i));
        i = j + 2;
        continue;
      }
      std::size_t j = text.find(' ', i);
      if (j == std::string::npos) j = text.size();
      w.push_back(text.substr(i, j - i));
      i = j + 1;
    }
    return w;
  };
  auto var = [](const std::string& r) { return "v" + r.substr(1); };
  for (const TraceEvent& e : events) {
    const std::vector<std::string> w = words(e.operands);
    std::string line;
    switch (e.op) {
      case TraceOp::Guess:
        line = var(w.at(1)) + " = guess(" + w.at(0) + ")";
        break;
      case TraceOp::Store:
        line = "store(" + w.at(0) + ", " + var(w.at(1)) + ")";
        break;
      case TraceOp::Lookup:
        line = var(w.at(1)) + " = lookup(" + w.at(0) + ")";
        break;
      case TraceOp::Lambda: {
        std::string args;
        if (w.at(2) != "-") {
          std::size_t i = 0;
          while (i <= w[2].size()) {
            std::size_t j = w[2].find(',', i);
            if (j == std::string::npos) j = w[2].size();
            args += ", " + var(w[2].substr(i, j - i));
            i = j + 1;
          }
        }
        line = var(w.at(3)) + " = lambda(" + w.at(0) + args + ")";
        if (w.at(1) != "0") line += "  # under " + w[1] + " context(s)";
        break;
      }
      case TraceOp::PushCtx:
        line = "push_context(" + var(w.at(0)) + ")";
        break;
      case TraceOp::PopCtx:
        line = "pop_context(" + var(w.at(0)) + ")";
        break;
      case TraceOp::PushScope:
        line = "# enter " + e.operands;
        break;
      case TraceOp::PopScope:
        --depth;
        line = "# leave " + e.operands;
        break;
      case TraceOp::Return:
        line = "return " + var(w.at(0));
        break;
    }
    out += std::string(static_cast<std::size_t>(std::max(0, depth)) * 4, ' ') + line + "\n";
    if (e.op == TraceOp::PushScope) ++depth;
  }
  return out;
}

bool is_reserved_name(const std::string& name) {
  return name.size() > 4 && name.starts_with("__") && name.ends_with("__");
}

ExecResult DirectChannel::run(ExecRequest request) {
  ++calls_;
  return std::move(model_.execute(tape_, std::span<const ExecRequest>(&request, 1)).front());
}

namespace {

std::string ref(int id) { return "#" + std::to_string(id); }

std::string squash(std::string_view text) {
  std::string out;
  bool space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  constexpr std::size_t kMax = 40;
  if (out.size() > kMax) {
    std::size_t cut = kMax;
    while (cut > 0 && (static_cast<unsigned char>(out[cut]) & 0xC0) == 0x80) --cut;
    out = out.substr(0, cut) + "...";
  }
  return out;
}

}  // namespace

Interpreter::Interpreter(const SyntaxTree& tree, InterpreterOptions options, NeuralContext neural)
    : tree_(tree), options_(options), neural_(neural) {
  if (neural_.model && (!neural_.tape || !neural_.encoded || !neural_.channel)) {
    throw InternalFault("interpreter: incomplete neural context");
  }
  Scope module;
  module.label = "module";
  scopes_.push_back(std::move(module));
}

int Interpreter::new_object(ObjectKind kind, int origin) {
  AbstractObject o;
  o.id = static_cast<int>(objects_.size());
  o.kind = kind;
  o.origin_node = origin;
  objects_.push_back(std::move(o));
  return objects_.back().id;
}

void Interpreter::emit(TraceOp op, std::string operands, const AstNode& node) {
  trace_.push_back(TraceEvent{op, std::move(operands), node.node_id});
}

Span Interpreter::donor_span(const AstNode& node) const {
  switch (node.kind) {
    case NodeKind::FunctionDefinition:
      return node.children.back().span;
    case NodeKind::Assignment:
      return node.children.back().span;
    case NodeKind::For:
      return node.child(1).span;
    default:
      return node.span;
  }
}

std::string Interpreter::guess_label(const AstNode& node) const {
  const Span s = donor_span(node);
  return nlohmann::json(squash(std::string_view(tree_.source()).substr(s.begin, s.size())))
      .dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

int Interpreter::guess(const AstNode& node, bool function) {
  const int id = new_object(function ? ObjectKind::Function : ObjectKind::Value, node.node_id);
  AbstractObject& o = objects_.back();
  o.guess_node = node.node_id;
  o.guess_kind = node.kind;
  o.function_default = function;
  emit(TraceOp::Guess, guess_label(node) + " " + ref(id), node);
  return id;
}

std::optional<int> Interpreter::peek(const std::string& name) const {
  for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
    auto f = it->table.find(name);
    if (f != it->table.end()) return f->second.current();
  }
  return std::nullopt;
}

int Interpreter::lookup(const std::string& name, const AstNode& node, bool function) {
  std::optional<int> found = peek(name);
  if (!found) {
    const int g = guess(node, function);
    store(name, g, node);
    found = g;
  }
  emit(TraceOp::Lookup, name + " " + ref(*found), node);
  return *found;
}

void Interpreter::store(const std::string& name, int object, const AstNode& node) {
  Scope& top = scopes_.back();
  auto [it, inserted] = top.table.try_emplace(name);
  if (inserted) {
    it->second.name = name;
    top.order.push_back(name);
    ++entries_;
    peak_entries_ = std::max(peak_entries_, entries_);
  }
  it->second.history.push_back(object);
  emit(TraceOp::Store, name + " " + ref(object), node);
}

int Interpreter::live_entries() const { return entries_; }

void Interpreter::push_scope(const std::string& label, bool function, const AstNode& node) {
  Scope s;
  s.label = label;
  s.function = function;
  scopes_.push_back(std::move(s));
  std::string compact;
  for (char c : label) {
    if (c != ' ') compact += c;
  }
  emit(TraceOp::PushScope, compact, node);
}

void Interpreter::pop_scope(const AstNode& node) {
  if (scopes_.size() <= 1) throw InternalFault("scope pop on module scope");
  std::string compact;
  for (char c : scopes_.back().label) {
    if (c != ' ') compact += c;
  }
  entries_ -= static_cast<int>(scopes_.back().table.size());
  scopes_.pop_back();
  emit(TraceOp::PopScope, compact, node);
}

void Interpreter::push_context(int object, const AstNode& node) {
  contexts_.push_back(object);
  emit(TraceOp::PushCtx, ref(object), node);
}

void Interpreter::pop_context(const AstNode& node) {
  if (contexts_.empty()) throw InternalFault("context pop on empty stack");
  const int top = contexts_.back();
  contexts_.pop_back();
  emit(TraceOp::PopCtx, ref(top), node);
}

void Interpreter::emit_return(int object, const AstNode& node) {
  emit(TraceOp::Return, ref(object), node);
  Scope* target = &scopes_.back();
  for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
    if (it->function) {
      target = &*it;
      break;
    }
  }
  auto [it, inserted] = target->table.try_emplace(kReturnName);
  if (inserted) {
    it->second.name = kReturnName;
    target->order.push_back(kReturnName);
    ++entries_;
    peak_entries_ = std::max(peak_entries_, entries_);
  }
  it->second.history.push_back(object);
}

std::optional<int> Interpreter::return_value() const {
  auto f = scopes_.back().table.find(kReturnName);
  if (f == scopes_.back().table.end()) return std::nullopt;
  return f->second.current();
}

int Interpreter::none_constant() {
  if (none_ < 0) {
    none_ = new_object(ObjectKind::Constant, -1);
    if (neural()) {
      objects_[static_cast<std::size_t>(none_)].fixed =
          neural_.model->builtin(*neural_.tape, builtin_table().index("const_obj_tensor_default"));
    }
  }
  return none_;
}

int Interpreter::unpack_index(int i) {
  auto it = unpack_.find(i);
  if (it != unpack_.end()) return it->second;
  const int id = new_object(ObjectKind::Constant, -1);
  if (neural()) objects_[static_cast<std::size_t>(id)].fixed = neural_.model->unpack_index(*neural_.tape, i);
  unpack_.emplace(i, id);
  return id;
}

int Interpreter::contaminated_view(int original, const AstNode& node) {
  const int id = new_object(objects_[static_cast<std::size_t>(original)].kind, node.node_id);
  AbstractObject& o = objects_.back();
  o.view_of = original;
  o.contaminated = true;
  return id;
}

std::vector<std::pair<int, int>> Interpreter::view_edges() const {
  std::vector<std::pair<int, int>> out;
  for (const AbstractObject& o : objects_) {
    if (o.view_of >= 0) out.emplace_back(o.view_of, o.id);
  }
  return out;
}

void Interpreter::note_assignment(const AstNode& lhs, const std::string& name, int object) {
  assignments_.push_back(Assignment{lhs.node_id, name, object});
}

int Interpreter::builtin_lambda(const std::string& builtin, std::vector<int> args, const AstNode& node) {
  Callee c;
  c.kind = CalleeKind::Builtin;
  c.name = builtin;
  c.builtin = builtin_table().index(builtin);
  return lambda(c, std::move(args), node);
}

int Interpreter::lambda(const Callee& callee, std::vector<int> args, const AstNode& node) {
  if (static_cast<int>(args.size()) > options_.max_args) args.resize(static_cast<std::size_t>(options_.max_args));
  LambdaRecord rec;
  rec.id = static_cast<int>(records_.size());
  rec.node_id = node.node_id;
  rec.callee = callee;
  rec.contexts = contexts_;
  rec.args = args;

  ExecResult res;
  if (neural()) {
    rec.theta = theta(callee);
    res = neural_.channel->run(request_for(rec));
    rec.arg_outputs = res.arg_outputs;
  }

  const int id = new_object(ObjectKind::Value, node.node_id);
  AbstractObject& o = objects_.back();
  o.producer = rec.id;
  o.guess_node = node.node_id;
  o.guess_kind = node.kind;
  o.executed = res.ret;
  for (int a : args) {
    if (objects_[static_cast<std::size_t>(a)].contaminated) o.contaminated = true;
  }
  rec.result = id;

  if (options_.snapshots) {
    Snapshot snap;
    std::unordered_map<int, std::string> seen;
    std::unordered_map<std::string, bool> shadowed;
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      for (const std::string& name : it->order) {
        if (shadowed.count(name)) continue;
        shadowed[name] = true;
        if (is_reserved_name(name)) continue;
        const int obj = it->table.at(name).current();
        if (objects_[static_cast<std::size_t>(obj)].kind == ObjectKind::Function) continue;
        snap.visible.emplace_back(name, obj);
        auto s = seen.find(obj);
        if (s == seen.end() || name < s->second) seen[obj] = name;
      }
    }
    for (const auto& [obj, name] : seen) snap.bindings.emplace_back(name, obj);
    std::sort(snap.visible.begin(), snap.visible.end());
    std::sort(snap.bindings.begin(), snap.bindings.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    rec.snapshot = static_cast<int>(snapshots_.size());
    snapshots_.push_back(std::move(snap));
  }

  std::string operands;
  for (char c : callee.name) {
    if (c != ' ' && c != '\t' && c != '\n') operands += c;
  }
  if (operands.empty()) operands = "<expr>";
  operands += ' ';
  operands += std::to_string(rec.contexts.size());
  operands += ' ';
  if (args.empty()) operands += '-';
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) operands += ',';
    operands += ref(args[i]);
  }
  operands += ' ';
  operands += ref(id);
  emit(TraceOp::Lambda, std::move(operands), node);
  records_.push_back(std::move(rec));
  return id;
}

ad::Var Interpreter::guessed(int object) {
  AbstractObject& o = objects_.at(static_cast<std::size_t>(object));
  if (!neural()) throw InternalFault("guessed vector requested in structural mode");
  if (o.fixed.valid()) return o.fixed;
  if (o.view_of >= 0) return guessed(o.view_of);
  if (o.guessed.valid()) return o.guessed;
  if (o.guess_node < 0) throw InternalFault("object without guess source");
  auto it = guess_cache_.find(o.guess_node);
  if (it == guess_cache_.end()) {
    const AstNode& n = tree_.node(o.guess_node);
    ad::Var v = neural_.model->pool(*neural_.tape, *neural_.encoded, donor_span(n), o.guess_kind, o.function_default);
    it = guess_cache_.emplace(o.guess_node, v).first;
  }
  objects_[static_cast<std::size_t>(object)].guessed = it->second;
  return it->second;
}

ad::Var Interpreter::node_guess(int node_id) {
  if (!neural()) throw InternalFault("guessed vector requested in structural mode");
  auto it = guess_cache_.find(node_id);
  if (it == guess_cache_.end()) {
    const AstNode& n = tree_.node(node_id);
    ad::Var v = neural_.model->pool(*neural_.tape, *neural_.encoded, donor_span(n), n.kind, false);
    it = guess_cache_.emplace(node_id, v).first;
  }
  return it->second;
}

ad::Var Interpreter::executed_or_guessed(int object) {
  const AbstractObject& o = objects_.at(static_cast<std::size_t>(object));
  if (o.view_of >= 0) return executed_or_guessed(o.view_of);
  if (o.executed.valid()) return o.executed;
  return guessed(object);
}

std::pair<ad::Var, ad::Var> Interpreter::argument_pair(int object) {
  const AbstractObject& o = objects_.at(static_cast<std::size_t>(object));
  if (o.view_of >= 0) return argument_pair(o.view_of);
  ad::Var g = guessed(object);
  const AbstractObject& o2 = objects_.at(static_cast<std::size_t>(object));
  return {g, o2.executed.valid() ? o2.executed : g};
}

ad::Var Interpreter::theta(const Callee& callee) {
  if (callee.kind == CalleeKind::Builtin) return neural_.model->builtin(*neural_.tape, callee.builtin);
  if (callee.object < 0) throw InternalFault("callee without object");
  return executed_or_guessed(callee.object);
}

ExecRequest Interpreter::request_for(const LambdaRecord& record, std::optional<std::pair<int, int>> replace) {
  ExecRequest req;
  req.theta = record.theta.valid() ? record.theta : theta(record.callee);
  for (int c : record.contexts) req.contexts.push_back(executed_or_guessed(c));
  for (std::size_t i = 0; i < record.args.size(); ++i) {
    int a = record.args[i];
    if (replace && replace->first == static_cast<int>(i)) a = replace->second;
    auto [g, e] = argument_pair(a);
    req.guessed.push_back(g);
    req.executed.push_back(e);
  }
  return req;
}

std::string Interpreter::memory_dump(bool with_vectors) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  std::map<std::string, int> label_count;
  for (const Scope& s : scopes_) {
    std::string label = s.label;
    const int n = label_count[label]++;
    if (n > 0) label += "#" + std::to_string(n);
    nlohmann::ordered_json table = nlohmann::ordered_json::object();
    for (const std::string& name : s.order) {
      const int id = s.table.at(name).current();
      const AbstractObject& o = objects_[static_cast<std::size_t>(id)];
      nlohmann::ordered_json entry;
      entry["object_id"] = id;
      entry["contaminated"] = o.contaminated;
      entry["has_executed"] = o.has_executed();
      if (with_vectors && neural()) {
        ad::Var g = guessed(id);
        entry["guessed"] = std::vector<double>(g.value().values().begin(), g.value().values().end());
        const AbstractObject& o2 = objects_[static_cast<std::size_t>(id)];
        if (o2.executed.valid()) {
          entry["executed"] =
              std::vector<double>(o2.executed.value().values().begin(), o2.executed.value().values().end());
        }
      }
      table[name] = std::move(entry);
    }
    out[label] = std::move(table);
  }
  return out.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace ni
