#include "ni/codegen.hpp"

#include "ni/errors.hpp"

namespace ni {

namespace {

std::string binary_builtin(const std::string& op) {
  if (op == "@") return "*";
  return op;
}

std::string augmented_builtin(const std::string& op) {
  if (op == "**=") return "**";
  if (op == "@=") return "*";
  return op;
}

std::string parameter_name(const AstNode& p) {
  std::string name = p.op;
  while (!name.empty() && name.front() == '*') name.erase(name.begin());
  return name;
}

}  // namespace

CodeGenerator::CodeGenerator(const SyntaxTree& tree, Interpreter& interp) : tree_(tree), in_(interp) {}

void CodeGenerator::unsupported(const AstNode& n) const {
  throw CodegenError(n.node_id, CodegenErrorKind::UnsupportedConstruct,
                     "unsupported construct '" + n.op + "' at line " + std::to_string(tree_.line_of(n.span.begin)));
}

void CodeGenerator::malformed(const AstNode& n, const std::string& what) const {
  throw CodegenError(n.node_id, CodegenErrorKind::MalformedNode,
                     what + " (" + node_kind_name(n.kind) + " at line " +
                         std::to_string(tree_.line_of(n.span.begin)) + ")");
}

void CodeGenerator::generate() {
  const AstNode& root = tree_.root();
  if (root.kind != NodeKind::Module) malformed(root, "root is not a module");
  for (const AstNode& s : root.children) statement(s);
}

void CodeGenerator::block(const AstNode& n) {
  if (n.kind != NodeKind::Block) malformed(n, "expected a block");
  ++blocks_[n.node_id];
  for (const AstNode& s : n.children) statement(s);
}

void CodeGenerator::statement(const AstNode& n) {
  ++statements_[n.node_id];
  switch (n.kind) {
    case NodeKind::FunctionDefinition:
      function_definition(n);
      return;
    case NodeKind::Assignment:
      assignment(n);
      return;
    case NodeKind::AugmentedAssignment:
      augmented_assignment(n);
      return;
    case NodeKind::ExpressionStatement:
      for (const AstNode& c : n.children) expr(c);
      return;
    case NodeKind::Return: {
      const int v = n.children.empty() ? in_.none_constant() : expr(n.child(0));
      in_.emit_return(v, n);
      return;
    }
    case NodeKind::If:
      if_chain(n, 0);
      return;
    case NodeKind::While:
      while_loop(n);
      return;
    case NodeKind::For:
      for_loop(n);
      return;
    case NodeKind::Try:
      try_statement(n);
      return;
    case NodeKind::Import:
    case NodeKind::ImportFrom:
      return;
    case NodeKind::Unsupported:
      unsupported(n);
    default:
      malformed(n, "not a statement");
  }
}

void CodeGenerator::function_definition(const AstNode& n) {
  if (n.children.size() != 3 || n.child(1).kind != NodeKind::Parameters) malformed(n, "malformed definition");
  const std::string& name = n.op;
  const AstNode& params = n.child(1);

  in_.push_scope("func: " + name, true, n);
  const bool was_compiling = compiling_.count(name) != 0;
  compiling_.insert(name);

  std::vector<std::string> names;
  std::vector<int> before;
  for (const AstNode& p : params.children) {
    int obj = -1;
    std::string pname;
    if (p.kind == NodeKind::Parameter) {
      pname = parameter_name(p);
      obj = in_.guess(p);
    } else if (p.kind == NodeKind::DefaultParameter) {
      pname = parameter_name(p.child(0));
      const int g = in_.guess(p.child(0));
      const int d = expr(p.child(1));
      obj = in_.builtin_lambda("__default_parameter__", {g, d}, p);
    } else {
      malformed(p, "malformed parameter");
    }
    in_.store(pname, obj, p);
    names.push_back(pname);
    before.push_back(obj);
  }

  block(n.child(2));

  const std::optional<int> returned = in_.return_value();
  const int ret = returned ? *returned : in_.none_constant();
  std::vector<int> after;
  for (const std::string& pname : names) after.push_back(in_.lookup(pname, n));

  in_.pop_scope(n);
  if (!was_compiling) compiling_.erase(name);

  const int g = in_.guess(n);
  std::vector<int> signature;
  signature.push_back(g);
  signature.insert(signature.end(), before.begin(), before.end());
  signature.push_back(ret);
  signature.insert(signature.end(), after.begin(), after.end());
  const int compiled = in_.builtin_lambda("__compile_function__", std::move(signature), n);
  in_.mark_function(compiled);
  in_.store(name, compiled, n.child(0));
}

void CodeGenerator::assignment(const AstNode& n) {
  if (n.children.size() < 2) malformed(n, "assignment without value");
  const int v = expr(n.children.back());
  const std::size_t targets = n.children.size() - 1;
  for (std::size_t i = 0; i < targets; ++i) bind_target(n.child(i), v, targets == 1);
}

void CodeGenerator::store_root(const AstNode& target, int value) {
  const AstNode* root = &target;
  while (root->kind == NodeKind::Attribute || root->kind == NodeKind::Subscript) root = &root->child(0);
  if (root->kind == NodeKind::Identifier) in_.store(root->op, value, *root);
}

void CodeGenerator::bind_target(const AstNode& target, int value, bool note) {
  switch (target.kind) {
    case NodeKind::Identifier:
      in_.store(target.op, value, target);
      if (note) in_.note_assignment(target, target.op, value);
      return;
    case NodeKind::TupleLiteral:
    case NodeKind::ListLiteral: {
      if (target.children.empty()) malformed(target, "empty unpacking target");
      for (std::size_t i = 0; i < target.children.size(); ++i) {
        if (target.child(i).kind == NodeKind::Unsupported) unsupported(target.child(i));
      }
      for (std::size_t i = 0; i < target.children.size(); ++i) {
        const int idx = in_.unpack_index(static_cast<int>(i));
        const int part = in_.builtin_lambda("__unpack_k__", {value, idx}, target);
        bind_target(target.child(i), part, false);
      }
      return;
    }
    case NodeKind::Attribute: {
      const int obj = expr(target.child(0));
      const int key = in_.guess(target.child(1));
      store_root(target, in_.builtin_lambda("__subscript_assign__", {obj, key, value}, target));
      return;
    }
    case NodeKind::Subscript: {
      const int obj = expr(target.child(0));
      const int key = index(target.child(1));
      store_root(target, in_.builtin_lambda("__subscript_assign__", {obj, key, value}, target));
      return;
    }
    case NodeKind::Unsupported:
      unsupported(target);
    default:
      malformed(target, "cannot assign to this expression");
  }
}

void CodeGenerator::augmented_assignment(const AstNode& n) {
  if (n.children.size() != 2) malformed(n, "malformed augmented assignment");
  const AstNode& t = n.child(0);
  const std::string op = augmented_builtin(n.op);
  switch (t.kind) {
    case NodeKind::Identifier: {
      const int cur = identifier(t);
      const int val = expr(n.child(1));
      in_.store(t.op, in_.builtin_lambda(op, {cur, val}, n), t);
      return;
    }
    case NodeKind::Attribute:
    case NodeKind::Subscript: {
      const int obj = expr(t.child(0));
      const bool attr = t.kind == NodeKind::Attribute;
      const int key = attr ? in_.guess(t.child(1)) : index(t.child(1));
      const int cur = in_.builtin_lambda(attr ? "__get_attr__" : "__subscript__", {obj, key}, t);
      const int val = expr(n.child(1));
      const int r = in_.builtin_lambda(op, {cur, val}, n);
      store_root(t, in_.builtin_lambda("__subscript_assign__", {obj, key, r}, n));
      return;
    }
    case NodeKind::Unsupported:
      unsupported(t);
    default:
      malformed(t, "cannot assign to this expression");
  }
}

void CodeGenerator::if_chain(const AstNode& n, std::size_t first_clause) {
  // n.children: test, body, Elif*, Else?
  const AstNode* cond = nullptr;
  const AstNode* body = nullptr;
  const AstNode* owner = &n;
  if (first_clause == 0) {
    if (n.children.size() < 2) malformed(n, "malformed if");
    cond = &n.child(0);
    body = &n.child(1);
    first_clause = 2;
  } else {
    owner = &n.child(first_clause);
    if (owner->kind != NodeKind::Elif || owner->children.size() != 2) malformed(*owner, "malformed elif");
    cond = &owner->child(0);
    body = &owner->child(1);
    first_clause += 1;
  }
  const int c = expr(*cond);
  const int ctx = in_.builtin_lambda("__if__", {c}, *owner);
  in_.push_context(ctx, *owner);
  block(*body);
  in_.pop_context(*owner);
  if (first_clause >= n.children.size()) return;

  const AstNode& next = n.child(first_clause);
  const int other = in_.builtin_lambda("__else__", {c}, next);
  in_.push_context(other, next);
  if (next.kind == NodeKind::Elif) {
    if_chain(n, first_clause);
  } else if (next.kind == NodeKind::Else) {
    block(next.child(0));
  } else {
    malformed(next, "unexpected clause");
  }
  in_.pop_context(next);
}

void CodeGenerator::while_loop(const AstNode& n) {
  if (n.children.size() < 2) malformed(n, "malformed while");
  const int c = expr(n.child(0));
  const int ctx = in_.builtin_lambda("__while__", {c}, n);
  in_.push_context(ctx, n);
  block(n.child(1));
  in_.pop_context(n);
  if (n.children.size() > 2) {
    const AstNode& e = n.child(2);
    const int other = in_.builtin_lambda("__else__", {c}, e);
    in_.push_context(other, e);
    block(e.child(0));
    in_.pop_context(e);
  }
}

void CodeGenerator::for_loop(const AstNode& n) {
  if (n.children.size() < 3) malformed(n, "malformed for");
  const int it = expr(n.child(1));
  const int ctx = in_.builtin_lambda("__for_in__", {it}, n);
  in_.push_context(ctx, n);
  bind_target(n.child(0), it, false);
  block(n.child(2));
  in_.builtin_lambda("__end_for_iterator__", {it}, n);
  in_.pop_context(n);
  if (n.children.size() > 3) {
    const AstNode& e = n.child(3);
    const int other = in_.builtin_lambda("__else__", {it}, e);
    in_.push_context(other, e);
    block(e.child(0));
    in_.pop_context(e);
  }
}

void CodeGenerator::try_statement(const AstNode& n) {
  if (n.children.empty()) malformed(n, "malformed try");
  const int t = in_.builtin_lambda("__try__", {}, n);
  in_.push_context(t, n);
  block(n.child(0));
  in_.pop_context(n);
  for (std::size_t i = 1; i < n.children.size(); ++i) {
    const AstNode& clause = n.child(i);
    switch (clause.kind) {
      case NodeKind::Except: {
        std::vector<int> args;
        if (clause.op != "bare") args.push_back(expr(clause.child(0)));
        const int e = in_.builtin_lambda("__except__", std::move(args), clause);
        in_.push_context(e, clause);
        if (clause.op == "typed_as") in_.store(clause.child(1).op, e, clause.child(1));
        block(clause.children.back());
        in_.pop_context(clause);
        break;
      }
      case NodeKind::Else: {
        const int e = in_.builtin_lambda("__else__", {t}, clause);
        in_.push_context(e, clause);
        block(clause.child(0));
        in_.pop_context(clause);
        break;
      }
      case NodeKind::Finally: {
        const int f = in_.builtin_lambda("__finally__", {}, clause);
        in_.push_context(f, clause);
        block(clause.child(0));
        in_.pop_context(clause);
        break;
      }
      default:
        malformed(clause, "unexpected clause");
    }
  }
}

int CodeGenerator::identifier(const AstNode& n) {
  const int obj = in_.lookup(n.op, n);
  if (n.node_id == in_.options().misuse_node) return in_.contaminated_view(obj, n);
  return obj;
}

int CodeGenerator::index(const AstNode& n) { return expr(n); }

int CodeGenerator::expr(const AstNode& n) {
  switch (n.kind) {
    case NodeKind::Identifier:
      return identifier(n);
    case NodeKind::NumberLit:
    case NodeKind::StringLit:
    case NodeKind::BoolLit:
    case NodeKind::NoneLit:
      return in_.guess(n);
    case NodeKind::BinaryOp: {
      if (n.children.size() != 2) malformed(n, "binary operator arity");
      const int l = expr(n.child(0));
      const int r = expr(n.child(1));
      return in_.builtin_lambda(binary_builtin(n.op), {l, r}, n);
    }
    case NodeKind::BooleanOp: {
      if (n.children.size() != 2) malformed(n, "boolean operator arity");
      const int l = expr(n.child(0));
      const int r = expr(n.child(1));
      return in_.builtin_lambda(n.op, {l, r}, n);
    }
    case NodeKind::UnaryOp: {
      if (n.children.size() != 1) malformed(n, "unary operator arity");
      const int x = expr(n.child(0));
      return in_.builtin_lambda(n.op, {x}, n);
    }
    case NodeKind::Comparison:
      return comparison(n);
    case NodeKind::Call:
      return call(n);
    case NodeKind::Attribute: {
      const int obj = expr(n.child(0));
      const int key = in_.guess(n.child(1));
      return in_.builtin_lambda("__get_attr__", {obj, key}, n);
    }
    case NodeKind::Subscript: {
      const int obj = expr(n.child(0));
      const int key = index(n.child(1));
      return in_.builtin_lambda("__subscript__", {obj, key}, n);
    }
    case NodeKind::Slice: {
      std::vector<int> parts;
      for (const AstNode& c : n.children) parts.push_back(expr(c));
      return in_.builtin_lambda("__slice__", std::move(parts), n);
    }
    case NodeKind::TupleLiteral:
    case NodeKind::ListLiteral:
    case NodeKind::SetLiteral:
    case NodeKind::DictLiteral:
      return collection(n);
    case NodeKind::ListComprehension:
    case NodeKind::DictComprehension:
      return comprehension(n);
    case NodeKind::ConditionalExpression: {
      if (n.children.size() != 3) malformed(n, "malformed conditional expression");
      const int c = expr(n.child(1));
      const int a = expr(n.child(0));
      const int b = expr(n.child(2));
      return in_.builtin_lambda("__conditional_expression__", {c, a, b}, n);
    }
    case NodeKind::Unsupported:
      unsupported(n);
    default:
      malformed(n, "not an expression");
  }
}

int CodeGenerator::comparison(const AstNode& n) {
  std::vector<std::string> ops;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = n.op.find(',', start);
    ops.push_back(n.op.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (ops.size() + 1 != n.children.size()) malformed(n, "comparison arity");
  int left = expr(n.child(0));
  int combined = -1;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const int right = expr(n.child(i + 1));
    int r;
    if (ops[i] == "not in") {
      r = in_.builtin_lambda("not", {in_.builtin_lambda("in", {left, right}, n)}, n);
    } else if (ops[i] == "is not") {
      r = in_.builtin_lambda("not", {in_.builtin_lambda("is", {left, right}, n)}, n);
    } else {
      r = in_.builtin_lambda(ops[i], {left, right}, n);
    }
    combined = combined < 0 ? r : in_.builtin_lambda("and", {combined, r}, n);
    left = right;
  }
  return combined;
}

int CodeGenerator::collection(const AstNode& n) {
  std::vector<int> items;
  if (n.kind == NodeKind::DictLiteral) {
    for (const AstNode& c : n.children) {
      if (c.kind == NodeKind::Pair) {
        const int k = expr(c.child(0));
        const int v = expr(c.child(1));
        items.push_back(in_.builtin_lambda("__dictionary_key_value__", {k, v}, c));
      } else if (c.kind == NodeKind::Argument && c.op == "**") {
        items.push_back(in_.builtin_lambda("__dictionary_splat__", {expr(c.child(0))}, c));
      } else {
        malformed(c, "malformed dictionary item");
      }
    }
    return in_.builtin_lambda("__dictionary_of__", std::move(items), n);
  }
  for (const AstNode& c : n.children) items.push_back(expr(c));
  const char* builtin = "__list_of__";
  if (n.kind == NodeKind::TupleLiteral) builtin = n.op == "bare" ? "__expression_list_of__" : "__tuple_of__";
  if (n.kind == NodeKind::SetLiteral) builtin = "__set_of__";
  return in_.builtin_lambda(builtin, std::move(items), n);
}

int CodeGenerator::comprehension(const AstNode& n) {
  // element, target, iterable, conditions...
  if (n.children.size() < 3) malformed(n, "malformed comprehension");
  const bool dict = n.kind == NodeKind::DictComprehension;
  const int it = expr(n.child(2));
  in_.push_scope("comprehension", false, n);
  const int ctx = in_.builtin_lambda(dict ? "__dictionary_comprehension__" : "__list_comprehension__", {it}, n);
  in_.push_context(ctx, n);
  bind_target(n.child(1), it, false);
  std::size_t pushed = 0;
  for (std::size_t i = 3; i < n.children.size(); ++i) {
    const int c = expr(n.child(i));
    in_.push_context(in_.builtin_lambda("__if_clause__", {c}, n.child(i)), n.child(i));
    ++pushed;
  }
  int element;
  if (dict) {
    const AstNode& pair = n.child(0);
    if (pair.kind != NodeKind::Pair) malformed(pair, "dictionary comprehension without pair");
    const int k = expr(pair.child(0));
    const int v = expr(pair.child(1));
    element = in_.builtin_lambda("__dictionary_key_value__", {k, v}, pair);
  } else {
    element = expr(n.child(0));
  }
  for (std::size_t i = 0; i < pushed; ++i) in_.pop_context(n);
  in_.pop_context(n);
  in_.pop_scope(n);
  const char* closing = "__list_of__";
  if (dict) closing = "__dictionary_of__";
  if (n.op == "generator") closing = "__generator__";
  if (n.op == "set") closing = "__set_of__";
  return in_.builtin_lambda(closing, {element}, n);
}

int CodeGenerator::call(const AstNode& n) {
  if (n.children.empty()) malformed(n, "call without callee");
  const AstNode& target = n.child(0);
  Callee callee;
  callee.kind = CalleeKind::Guessed;
  std::vector<int> args;

  if (target.kind == NodeKind::Identifier) {
    callee.name = target.op;
    if (compiling_.count(target.op)) {
      callee.object = in_.guess(target, true);
      in_.store(target.op, callee.object, target);
    } else {
      callee.object = in_.lookup(target.op, target, true);
      if (target.node_id == in_.options().misuse_node) callee.object = in_.contaminated_view(callee.object, target);
    }
    if (in_.object(callee.object).compiled) callee.kind = CalleeKind::Compiled;
  } else if (target.kind == NodeKind::Attribute) {
    args.push_back(expr(target.child(0)));
    callee.object = in_.guess(target.child(1), true);
    callee.name = "." + target.child(1).op;
  } else {
    callee.object = expr(target);
    callee.name = "<expr>";
    if (in_.object(callee.object).compiled) callee.kind = CalleeKind::Compiled;
  }

  for (std::size_t i = 1; i < n.children.size(); ++i) {
    const AstNode& a = n.child(i);
    if (a.kind == NodeKind::Argument) {
      const int v = expr(a.child(0));
      if (a.op == "*") {
        args.push_back(in_.builtin_lambda("__list_splat__", {v}, a));
      } else if (a.op == "**") {
        args.push_back(in_.builtin_lambda("__dictionary_splat__", {v}, a));
      } else {
        args.push_back(v);
      }
    } else if (a.kind == NodeKind::KeywordArgument) {
      const int key = in_.guess(a.child(0));
      const int v = expr(a.child(1));
      args.push_back(in_.builtin_lambda("__keyword_argument__", {key, v}, a));
    } else {
      malformed(a, "malformed call argument");
    }
  }
  return in_.lambda(callee, std::move(args), n);
}

StructuralRun run_structural(const SyntaxTree& tree, InterpreterOptions options) {
  StructuralRun run;
  run.interp = std::make_unique<Interpreter>(tree, options);
  CodeGenerator gen(tree, *run.interp);
  gen.generate();
  run.statement_counts = gen.statement_counts();
  run.block_counts = gen.block_counts();
  return run;
}

}  // namespace ni
