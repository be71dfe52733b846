#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace ni {

enum class NodeKind {
  Module,
  FunctionDefinition,
  Parameters,
  Parameter,
  DefaultParameter,
  Block,
  Assignment,
  AugmentedAssignment,
  ExpressionStatement,
  Return,
  Call,
  Argument,
  KeywordArgument,
  Identifier,
  Attribute,
  Subscript,
  Slice,
  BinaryOp,
  UnaryOp,
  BooleanOp,
  Comparison,
  If,
  Elif,
  Else,
  While,
  For,
  ListLiteral,
  TupleLiteral,
  SetLiteral,
  DictLiteral,
  Pair,
  ListComprehension,
  DictComprehension,
  ConditionalExpression,
  Try,
  Except,
  Finally,
  Import,
  ImportFrom,
  StringLit,
  NumberLit,
  BoolLit,
  NoneLit,
  Unsupported,
};

inline constexpr int kNodeKindCount = static_cast<int>(NodeKind::Unsupported) + 1;

const char* node_kind_name(NodeKind kind);
bool is_statement_kind(NodeKind kind);

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(const Span& o) const { return begin <= o.begin && o.end <= end; }
  friend bool operator==(const Span&, const Span&) = default;
};

// `op` carries the construct-specific detail:
//   BinaryOp/UnaryOp/AugmentedAssignment/BooleanOp  operator text ("+", "not", "+=", "and")
//   Comparison          operators joined by ',' ("<,not in")
//   Identifier/Parameter name (Parameter keeps a leading "*" or "**")
//   FunctionDefinition  function name
//   TupleLiteral        "bare" when written without parentheses
//   Slice               presence mask of lower/upper/step, e.g. "101"
//   Except              "bare", "typed" or "typed_as"
//   Argument            "", "*" or "**"
//   ListComprehension   "list", "generator" or "set"
//   ExpressionStatement "" for an expression, else the keyword (pass, assert, ...)
//   Unsupported         short description of the construct
struct AstNode {
  NodeKind kind = NodeKind::Unsupported;
  Span span;
  int node_id = -1;
  std::string op;
  std::vector<AstNode> children;

  const AstNode& child(std::size_t i) const { return children.at(i); }
};

class SyntaxTree {
 public:
  SyntaxTree(std::string source, AstNode root);

  const std::string& source() const { return source_; }
  const AstNode& root() const { return *root_; }
  std::string_view text(const AstNode& node) const;
  std::size_t node_count() const { return by_id_.size(); }
  const AstNode& node(int id) const { return *by_id_.at(static_cast<std::size_t>(id)); }
  // -1 for the root.
  int parent_id(int id) const { return parent_.at(static_cast<std::size_t>(id)); }
  // 1-based line of a byte offset.
  int line_of(std::size_t offset) const;

 private:
  std::string source_;
  std::unique_ptr<AstNode> root_;
  std::vector<const AstNode*> by_id_;
  std::vector<int> parent_;
};

// Parses the supported Python subset. Throws SyntaxError when the text cannot
// be parsed at all; recognizable but unsupported constructs become
// Unsupported nodes.
SyntaxTree parse(std::string source);

// Pre-order traversal.
void walk(const SyntaxTree& tree, const std::function<void(const AstNode&)>& visitor);
void walk(const AstNode& node, const std::function<void(const AstNode&)>& visitor);

// Indented S-expression rendering used by tests and debugging.
std::string dump(const SyntaxTree& tree);

}  // namespace ni
