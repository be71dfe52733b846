#include <algorithm>
#include <array>
#include <cstring>
#include <sstream>
#include <unordered_set>

#include "ni/ast.hpp"
#include "ni/errors.hpp"

namespace ni {

namespace {

constexpr std::array<const char*, kNodeKindCount> kKindNames = {
    "Module",        "FunctionDefinition", "Parameters",         "Parameter",         "DefaultParameter",
    "Block",         "Assignment",         "AugmentedAssignment", "ExpressionStatement", "Return",
    "Call",          "Argument",           "KeywordArgument",    "Identifier",        "Attribute",
    "Subscript",     "Slice",              "BinaryOp",           "UnaryOp",           "BooleanOp",
    "Comparison",    "If",                 "Elif",               "Else",              "While",
    "For",           "ListLiteral",        "TupleLiteral",       "SetLiteral",        "DictLiteral",
    "Pair",          "ListComprehension",  "DictComprehension",  "ConditionalExpression", "Try",
    "Except",        "Finally",            "Import",             "ImportFrom",        "StringLit",
    "NumberLit",     "BoolLit",            "NoneLit",            "Unsupported",
};

// ---- lexer ------------------------------------------------------------------

enum class TokType { Name, Number, String, Op, Newline, Indent, Dedent, End };

struct Tok {
  TokType type;
  std::size_t begin;
  std::size_t end;
  std::string_view text;
};

const std::unordered_set<std::string_view> kKeywords = {
    "False", "None",   "True",    "and",      "as",     "assert", "async",  "await", "break",
    "class", "continue", "def",   "del",      "elif",   "else",   "except", "finally", "for",
    "from",  "global", "if",      "import",   "in",     "is",     "lambda", "nonlocal", "not",
    "or",    "pass",   "raise",   "return",   "try",    "while",  "with",   "yield",
};

// Longest first.
constexpr std::array<const char*, 48> kOperators = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", ">>", "<<", "<=", ">=", "==", "!=", "<>",
    "+=",  "-=",  "*=",  "/=",  "%=",  "&=", "|=", "^=", "@=", "+",  "-",  "*",  "/",  "%",  "@",  "&",
    "|",   "^",   "~",   "<",   ">",   "(",  ")",  "[",  "]",  "{",  "}",  ",",  ":",  ".",  ";",  "=",
};

class SourceMap {
 public:
  explicit SourceMap(std::string_view src) {
    starts_.push_back(0);
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i] == '\n') starts_.push_back(i + 1);
    }
  }
  int line(std::size_t offset) const {
    return static_cast<int>(std::upper_bound(starts_.begin(), starts_.end(), offset) - starts_.begin());
  }
  int column(std::size_t offset) const {
    return static_cast<int>(offset - starts_[static_cast<std::size_t>(line(offset) - 1)]) + 1;
  }

 private:
  std::vector<std::size_t> starts_;
};

[[noreturn]] void fail(std::string_view src, std::size_t offset, const std::string& message) {
  SourceMap map(src);
  throw SyntaxError(offset, map.line(offset), map.column(offset),
                    "line " + std::to_string(map.line(offset)) + ": " + message);
}

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Tok> run() {
    std::vector<int> indents = {0};
    int depth = 0;
    bool line_start = true;
    while (true) {
      if (line_start && depth == 0) {
        int col = 0;
        std::size_t p = pos_;
        while (p < src_.size() && (src_[p] == ' ' || src_[p] == '\t' || src_[p] == '\f')) {
          col = src_[p] == '\t' ? (col / 8 + 1) * 8 : src_[p] == '\f' ? 0 : col + 1;
          ++p;
        }
        if (p >= src_.size()) {
          pos_ = p;
          break;
        }
        if (src_[p] == '#' || src_[p] == '\n' || src_[p] == '\r') {
          while (p < src_.size() && src_[p] != '\n') ++p;
          pos_ = p < src_.size() ? p + 1 : p;
          continue;
        }
        pos_ = p;
        if (col > indents.back()) {
          indents.push_back(col);
          emit(TokType::Indent, pos_, pos_);
        } else {
          while (col < indents.back()) {
            indents.pop_back();
            emit(TokType::Dedent, pos_, pos_);
          }
          if (col != indents.back()) fail(src_, pos_, "unindent does not match any outer indentation level");
        }
        line_start = false;
      }
      while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\f')) ++pos_;
      if (pos_ >= src_.size()) break;
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
        continue;
      }
      if (c == '\\') {
        std::size_t p = pos_ + 1;
        if (p < src_.size() && src_[p] == '\r') ++p;
        if (p < src_.size() && src_[p] == '\n') {
          pos_ = p + 1;
          continue;
        }
        fail(src_, pos_, "unexpected character after line continuation");
      }
      if (c == '\n' || c == '\r') {
        const std::size_t at = pos_;
        pos_ += (c == '\r' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') ? 2 : 1;
        if (depth == 0) {
          emit(TokType::Newline, at, at);
          line_start = true;
        }
        continue;
      }
      if (string_start()) {
        lex_string();
        continue;
      }
      if (ident_start(static_cast<unsigned char>(c))) {
        const std::size_t b = pos_;
        while (pos_ < src_.size() && ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        emit(TokType::Name, b, pos_);
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        lex_number();
        continue;
      }
      bool matched = false;
      for (const char* op : kOperators) {
        const std::size_t n = std::strlen(op);
        if (src_.compare(pos_, n, op) == 0) {
          if (n == 1 && (c == '(' || c == '[' || c == '{')) ++depth;
          if (n == 1 && (c == ')' || c == ']' || c == '}')) depth = std::max(0, depth - 1);
          emit(TokType::Op, pos_, pos_ + n);
          pos_ += n;
          matched = true;
          break;
        }
      }
      if (!matched) fail(src_, pos_, std::string("unexpected character '") + c + "'");
    }
    if (!toks_.empty() && toks_.back().type != TokType::Newline && toks_.back().type != TokType::Dedent &&
        toks_.back().type != TokType::Indent) {
      emit(TokType::Newline, src_.size(), src_.size());
    }
    while (indents.size() > 1) {
      indents.pop_back();
      emit(TokType::Dedent, src_.size(), src_.size());
    }
    emit(TokType::End, src_.size(), src_.size());
    return std::move(toks_);
  }

 private:
  void emit(TokType t, std::size_t b, std::size_t e) {
    if (t == TokType::Newline && (toks_.empty() || toks_.back().type == TokType::Newline)) return;
    toks_.push_back(Tok{t, b, e, src_.substr(b, e - b)});
  }

  bool string_start() const {
    std::size_t p = pos_;
    while (p < src_.size() && p - pos_ < 2 && std::strchr("rRbBuUfF", src_[p]) != nullptr && src_[p] != '\0') ++p;
    return p < src_.size() && (src_[p] == '\'' || src_[p] == '"');
  }

  void lex_string() {
    const std::size_t b = pos_;
    while (src_[pos_] != '\'' && src_[pos_] != '"') ++pos_;
    const char q = src_[pos_];
    const bool triple = src_.compare(pos_, 3, std::string(3, q)) == 0;
    pos_ += triple ? 3 : 1;
    while (true) {
      if (pos_ >= src_.size()) fail(src_, b, "unterminated string literal");
      const char c = src_[pos_];
      if (c == '\\') {
        pos_ += 2;
        continue;
      }
      if (triple) {
        if (src_.compare(pos_, 3, std::string(3, q)) == 0) {
          pos_ += 3;
          break;
        }
      } else {
        if (c == q) {
          ++pos_;
          break;
        }
        if (c == '\n') fail(src_, b, "unterminated string literal");
      }
      ++pos_;
    }
    pos_ = std::min(pos_, src_.size());
    emit(TokType::String, b, pos_);
  }

  void lex_number() {
    const std::size_t b = pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        const char c = src_[pos_];
        if ((c == 'e' || c == 'E') && pos_ + 1 < src_.size() && (src_[pos_ + 1] == '+' || src_[pos_ + 1] == '-') &&
            src_.compare(b, 2, "0x") != 0 && src_.compare(b, 2, "0X") != 0) {
          pos_ += 2;
          continue;
        }
        ++pos_;
      }
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      digits();
    }
    emit(TokType::Number, b, pos_);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::vector<Tok> toks_;
};

// ---- parser -----------------------------------------------------------------

const std::unordered_set<std::string_view> kAugOps = {"+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=",
                                                      "<<=", "&=", "|=", "^=", "@="};

class Parser {
 public:
  Parser(std::string_view src, std::vector<Tok> toks) : src_(src), toks_(std::move(toks)) {}

  AstNode module() {
    AstNode root = node(NodeKind::Module, 0, src_.size());
    while (!at(TokType::End)) {
      if (at(TokType::Newline)) {
        ++i_;
        continue;
      }
      if (at(TokType::Indent)) error("unexpected indent");
      statement(root.children);
    }
    return root;
  }

 private:
  // token helpers
  const Tok& cur() const { return toks_[i_]; }
  const Tok& peek(std::size_t k = 1) const { return toks_[std::min(i_ + k, toks_.size() - 1)]; }
  bool at(TokType t) const { return cur().type == t; }
  bool at_op(std::string_view s) const { return cur().type == TokType::Op && cur().text == s; }
  bool at_kw(std::string_view s) const { return cur().type == TokType::Name && cur().text == s; }
  bool at_name() const { return cur().type == TokType::Name && kKeywords.count(cur().text) == 0; }
  std::size_t prev_end() const { return toks_[i_ - 1].end; }

  [[noreturn]] void error(const std::string& message) const {
    const Tok& t = cur();
    std::string what = message;
    if (t.type == TokType::End) what += " (unexpected end of input)";
    else if (t.type == TokType::Newline) what += " (unexpected end of line)";
    else if (t.type == TokType::Indent) what += " (unexpected indent)";
    else if (t.type == TokType::Dedent) what += " (unexpected dedent)";
    else what += " near '" + std::string(t.text) + "'";
    fail(src_, t.begin, what);
  }

  const Tok& expect_op(std::string_view s) {
    if (!at_op(s)) error("expected '" + std::string(s) + "'");
    return toks_[i_++];
  }
  const Tok& expect_kw(std::string_view s) {
    if (!at_kw(s)) error("expected '" + std::string(s) + "'");
    return toks_[i_++];
  }
  const Tok& expect_name() {
    if (!at_name()) error("expected a name");
    return toks_[i_++];
  }

  static AstNode node(NodeKind kind, std::size_t b, std::size_t e, std::string op = {},
                      std::vector<AstNode> children = {}) {
    AstNode n;
    n.kind = kind;
    n.span = Span{b, e};
    n.op = std::move(op);
    n.children = std::move(children);
    return n;
  }
  static AstNode unsupported(std::size_t b, std::size_t e, std::string what) {
    return node(NodeKind::Unsupported, b, e, std::move(what));
  }

  bool starts_expression() const {
    const Tok& t = cur();
    if (t.type == TokType::Number || t.type == TokType::String) return true;
    if (t.type == TokType::Name) {
      return kKeywords.count(t.text) == 0 || t.text == "not" || t.text == "lambda" || t.text == "None" ||
             t.text == "True" || t.text == "False" || t.text == "await" || t.text == "yield";
    }
    if (t.type == TokType::Op) {
      return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" || t.text == "+" || t.text == "~" ||
             t.text == "*" || t.text == "..." || t.text == "**";
    }
    return false;
  }

  // ---- statements ----

  void statement(std::vector<AstNode>& out) {
    if (at_kw("if")) return out.push_back(if_stmt());
    if (at_kw("while")) return out.push_back(while_stmt());
    if (at_kw("for")) return out.push_back(for_stmt());
    if (at_kw("try")) return out.push_back(try_stmt());
    if (at_kw("def")) return out.push_back(def_stmt());
    if (at_kw("class")) return out.push_back(class_stmt());
    if (at_kw("with")) return out.push_back(with_stmt());
    if (at_kw("async")) {
      const std::size_t b = cur().begin;
      ++i_;
      std::vector<AstNode> inner;
      if (!at_kw("def") && !at_kw("for") && !at_kw("with")) error("expected def, for or with after async");
      statement(inner);
      return out.push_back(unsupported(b, inner.back().span.end, "async " + unsupported_word(inner.back())));
    }
    if (at_op("@")) return out.push_back(decorated());
    simple_statements(out);
  }

  static std::string unsupported_word(const AstNode& n) {
    switch (n.kind) {
      case NodeKind::FunctionDefinition: return "def";
      case NodeKind::For: return "for";
      default: return n.op;
    }
  }

  void simple_statements(std::vector<AstNode>& out) {
    out.push_back(small_statement());
    while (at_op(";")) {
      ++i_;
      if (at(TokType::Newline) || at(TokType::End)) break;
      out.push_back(small_statement());
    }
    if (at(TokType::Newline)) {
      ++i_;
    } else if (!at(TokType::End) && !at(TokType::Dedent)) {
      error("expected end of statement");
    }
  }

  AstNode small_statement() {
    const Tok& t = cur();
    const std::size_t b = t.begin;
    if (at_kw("pass") || at_kw("break") || at_kw("continue")) {
      ++i_;
      return node(NodeKind::ExpressionStatement, b, t.end, std::string(t.text));
    }
    if (at_kw("return")) {
      ++i_;
      AstNode r = node(NodeKind::Return, b, prev_end());
      if (starts_expression()) {
        r.children.push_back(testlist_star());
        r.span.end = r.children.back().span.end;
      }
      return r;
    }
    if (at_kw("import") || at_kw("from")) {
      const NodeKind kind = at_kw("import") ? NodeKind::Import : NodeKind::ImportFrom;
      ++i_;
      bool any = false;
      while (!at(TokType::Newline) && !at(TokType::End) && !at_op(";")) {
        if (at(TokType::Indent) || at(TokType::Dedent)) error("malformed import");
        any = true;
        ++i_;
      }
      if (!any) error("malformed import");
      return node(kind, b, prev_end());
    }
    if (at_kw("global") || at_kw("nonlocal") || at_kw("del")) {
      const std::string word(t.text);
      ++i_;
      if (word == "del") {
        testlist_star();
      } else {
        expect_name();
        while (at_op(",")) {
          ++i_;
          expect_name();
        }
      }
      return unsupported(b, prev_end(), word);
    }
    if (at_kw("assert")) {
      ++i_;
      AstNode s = node(NodeKind::ExpressionStatement, b, 0, "assert");
      s.children.push_back(test());
      if (at_op(",")) {
        ++i_;
        s.children.push_back(test());
      }
      s.span.end = s.children.back().span.end;
      return s;
    }
    if (at_kw("raise")) {
      ++i_;
      AstNode s = node(NodeKind::ExpressionStatement, b, t.end, "raise");
      if (starts_expression()) {
        s.children.push_back(test());
        if (at_kw("from")) {
          ++i_;
          s.children.push_back(test());
        }
        s.span.end = s.children.back().span.end;
      }
      return s;
    }
    return expression_statement();
  }

  AstNode expression_statement() {
    AstNode first = testlist_star();
    const std::size_t b = first.span.begin;
    if (at_op("=")) {
      std::vector<AstNode> parts;
      parts.push_back(std::move(first));
      while (at_op("=")) {
        ++i_;
        parts.push_back(at_kw("yield") ? yield_expr() : testlist_star());
      }
      const std::size_t e = parts.back().span.end;
      return node(NodeKind::Assignment, b, e, "", std::move(parts));
    }
    if (cur().type == TokType::Op && kAugOps.count(cur().text) != 0) {
      std::string op(cur().text);
      ++i_;
      AstNode value = at_kw("yield") ? yield_expr() : testlist_star();
      const std::size_t e = value.span.end;
      std::vector<AstNode> parts;
      parts.push_back(std::move(first));
      parts.push_back(std::move(value));
      return node(NodeKind::AugmentedAssignment, b, e, op, std::move(parts));
    }
    if (at_op(":")) {
      ++i_;
      test();
      if (at_op("=")) {
        ++i_;
        testlist_star();
      }
      return unsupported(b, prev_end(), "annotated assignment");
    }
    const std::size_t e = first.span.end;
    std::vector<AstNode> parts;
    parts.push_back(std::move(first));
    return node(NodeKind::ExpressionStatement, b, e, "", std::move(parts));
  }

  AstNode suite() {
    expect_op(":");
    AstNode block = node(NodeKind::Block, 0, 0);
    if (at(TokType::Newline)) {
      ++i_;
      if (!at(TokType::Indent)) error("expected an indented block");
      ++i_;
      while (!at(TokType::Dedent) && !at(TokType::End)) {
        if (at(TokType::Newline)) {
          ++i_;
          continue;
        }
        statement(block.children);
      }
      if (at(TokType::Dedent)) ++i_;
    } else {
      simple_statements(block.children);
    }
    if (block.children.empty()) error("expected a statement");
    block.span = Span{block.children.front().span.begin, block.children.back().span.end};
    return block;
  }

  AstNode if_stmt() {
    const std::size_t b = expect_kw("if").begin;
    AstNode n = node(NodeKind::If, b, 0);
    n.children.push_back(named_test());
    n.children.push_back(suite());
    while (at_kw("elif")) {
      const std::size_t eb = cur().begin;
      ++i_;
      AstNode elif = node(NodeKind::Elif, eb, 0);
      elif.children.push_back(named_test());
      elif.children.push_back(suite());
      elif.span.end = elif.children.back().span.end;
      n.children.push_back(std::move(elif));
    }
    if (at_kw("else")) n.children.push_back(else_clause());
    n.span.end = n.children.back().span.end;
    return n;
  }

  AstNode else_clause() {
    const std::size_t b = expect_kw("else").begin;
    AstNode e = node(NodeKind::Else, b, 0);
    e.children.push_back(suite());
    e.span.end = e.children.back().span.end;
    return e;
  }

  AstNode while_stmt() {
    const std::size_t b = expect_kw("while").begin;
    AstNode n = node(NodeKind::While, b, 0);
    n.children.push_back(named_test());
    n.children.push_back(suite());
    if (at_kw("else")) n.children.push_back(else_clause());
    n.span.end = n.children.back().span.end;
    return n;
  }

  AstNode for_stmt() {
    const std::size_t b = expect_kw("for").begin;
    AstNode n = node(NodeKind::For, b, 0);
    n.children.push_back(exprlist());
    expect_kw("in");
    n.children.push_back(testlist_star());
    n.children.push_back(suite());
    if (at_kw("else")) n.children.push_back(else_clause());
    n.span.end = n.children.back().span.end;
    return n;
  }

  AstNode try_stmt() {
    const std::size_t b = expect_kw("try").begin;
    AstNode n = node(NodeKind::Try, b, 0);
    n.children.push_back(suite());
    bool handlers = false;
    while (at_kw("except")) {
      handlers = true;
      const std::size_t eb = cur().begin;
      ++i_;
      if (at_op("*")) error("except* is not supported");
      AstNode ex = node(NodeKind::Except, eb, 0, "bare");
      if (!at_op(":")) {
        ex.op = "typed";
        ex.children.push_back(test());
        if (at_kw("as")) {
          ++i_;
          const Tok& name = expect_name();
          ex.op = "typed_as";
          ex.children.push_back(node(NodeKind::Identifier, name.begin, name.end, std::string(name.text)));
        } else if (at_op(",")) {
          error("old-style except clause");
        }
      }
      ex.children.push_back(suite());
      ex.span.end = ex.children.back().span.end;
      n.children.push_back(std::move(ex));
    }
    if (at_kw("else")) {
      if (!handlers) error("else without except");
      n.children.push_back(else_clause());
    }
    if (at_kw("finally")) {
      const std::size_t fb = cur().begin;
      ++i_;
      AstNode fin = node(NodeKind::Finally, fb, 0);
      fin.children.push_back(suite());
      fin.span.end = fin.children.back().span.end;
      n.children.push_back(std::move(fin));
      handlers = true;
    }
    if (!handlers) error("expected except or finally");
    n.span.end = n.children.back().span.end;
    return n;
  }

  AstNode def_stmt() {
    const std::size_t b = expect_kw("def").begin;
    const Tok& name = expect_name();
    AstNode n = node(NodeKind::FunctionDefinition, b, 0, std::string(name.text));
    n.children.push_back(node(NodeKind::Identifier, name.begin, name.end, std::string(name.text)));
    const std::size_t pb = expect_op("(").begin;
    AstNode params = node(NodeKind::Parameters, pb, 0);
    while (!at_op(")")) {
      if (at_op("/") || (at_op("*") && (peek().text == "," || peek().text == ")"))) {
        ++i_;
      } else {
        params.children.push_back(parameter());
      }
      if (!at_op(",")) break;
      ++i_;
    }
    params.span.end = expect_op(")").end;
    n.children.push_back(std::move(params));
    if (at_op("->")) {
      ++i_;
      test();
    }
    n.children.push_back(suite());
    n.span.end = n.children.back().span.end;
    return n;
  }

  AstNode parameter() {
    const std::size_t b = cur().begin;
    std::string stars;
    if (at_op("*") || at_op("**")) {
      stars = std::string(cur().text);
      ++i_;
    }
    const Tok& name = expect_name();
    AstNode p = node(NodeKind::Parameter, b, name.end, stars + std::string(name.text));
    if (at_op(":")) {
      ++i_;
      test();
    }
    if (at_op("=")) {
      if (!stars.empty()) error("starred parameter cannot have a default");
      ++i_;
      AstNode value = test();
      const std::size_t e = value.span.end;
      std::vector<AstNode> parts;
      parts.push_back(std::move(p));
      parts.push_back(std::move(value));
      return node(NodeKind::DefaultParameter, b, e, "", std::move(parts));
    }
    return p;
  }

  AstNode class_stmt() {
    const std::size_t b = expect_kw("class").begin;
    expect_name();
    if (at_op("(")) {
      ++i_;
      call_arguments();
      expect_op(")");
    }
    AstNode body = suite();
    return unsupported(b, body.span.end, "class");
  }

  AstNode with_stmt() {
    const std::size_t b = expect_kw("with").begin;
    while (true) {
      test();
      if (at_kw("as")) {
        ++i_;
        exprlist();
      }
      if (!at_op(",")) break;
      ++i_;
    }
    AstNode body = suite();
    return unsupported(b, body.span.end, "with");
  }

  AstNode decorated() {
    const std::size_t b = cur().begin;
    while (at_op("@")) {
      ++i_;
      named_test();
      if (!at(TokType::Newline)) error("expected newline after decorator");
      ++i_;
    }
    std::vector<AstNode> inner;
    if (at_kw("async")) {
      statement(inner);
    } else if (at_kw("def")) {
      inner.push_back(def_stmt());
    } else if (at_kw("class")) {
      inner.push_back(class_stmt());
    } else {
      error("expected def or class after decorator");
    }
    return unsupported(b, inner.back().span.end, "decorator");
  }

  // ---- expressions ----

  // Comma-separated expressions; more than one (or a trailing comma) gives a
  // bare tuple.
  template <typename F>
  AstNode comma_list(F element) {
    AstNode first = element();
    if (!at_op(",")) return first;
    AstNode tuple = node(NodeKind::TupleLiteral, first.span.begin, first.span.end, "bare");
    tuple.children.push_back(std::move(first));
    while (at_op(",")) {
      ++i_;
      if (!starts_expression()) break;
      tuple.children.push_back(element());
    }
    tuple.span.end = tuple.children.back().span.end;
    return tuple;
  }

  AstNode testlist_star() {
    return comma_list([this] { return at_op("*") ? star_expr() : test(); });
  }

  AstNode exprlist() {
    return comma_list([this] { return at_op("*") ? star_expr() : bitor_expr(); });
  }

  AstNode star_expr() {
    const std::size_t b = expect_op("*").begin;
    AstNode inner = bitor_expr();
    return unsupported(b, inner.span.end, "starred expression");
  }

  AstNode yield_expr() {
    const std::size_t b = expect_kw("yield").begin;
    if (at_kw("from")) {
      ++i_;
      test();
    } else if (starts_expression()) {
      testlist_star();
    }
    return unsupported(b, prev_end(), "yield");
  }

  AstNode named_test() {
    AstNode t = test();
    if (at_op(":=")) {
      ++i_;
      AstNode value = test();
      return unsupported(t.span.begin, value.span.end, "named expression");
    }
    return t;
  }

  AstNode test() {
    if (at_kw("lambda")) return lambda_expr();
    if (at_kw("yield")) return yield_expr();
    AstNode body = or_test();
    if (at_kw("if")) {
      ++i_;
      AstNode cond = or_test();
      expect_kw("else");
      AstNode orelse = test();
      const std::size_t b = body.span.begin, e = orelse.span.end;
      std::vector<AstNode> parts;
      parts.push_back(std::move(body));
      parts.push_back(std::move(cond));
      parts.push_back(std::move(orelse));
      return node(NodeKind::ConditionalExpression, b, e, "", std::move(parts));
    }
    return body;
  }

  AstNode lambda_expr() {
    const std::size_t b = expect_kw("lambda").begin;
    while (!at_op(":")) {
      if (at(TokType::Newline) || at(TokType::End)) error("malformed lambda");
      if (at_op("=")) {
        ++i_;
        test();
        continue;
      }
      ++i_;
    }
    ++i_;
    AstNode body = test();
    return unsupported(b, body.span.end, "lambda");
  }

  static AstNode binary(NodeKind kind, std::string op, AstNode l, AstNode r) {
    const std::size_t b = l.span.begin, e = r.span.end;
    std::vector<AstNode> parts;
    parts.push_back(std::move(l));
    parts.push_back(std::move(r));
    return node(kind, b, e, std::move(op), std::move(parts));
  }

  AstNode or_test() {
    AstNode l = and_test();
    while (at_kw("or")) {
      ++i_;
      l = binary(NodeKind::BooleanOp, "or", std::move(l), and_test());
    }
    return l;
  }

  AstNode and_test() {
    AstNode l = not_test();
    while (at_kw("and")) {
      ++i_;
      l = binary(NodeKind::BooleanOp, "and", std::move(l), not_test());
    }
    return l;
  }

  AstNode not_test() {
    if (at_kw("not")) {
      const std::size_t b = cur().begin;
      ++i_;
      AstNode x = not_test();
      const std::size_t e = x.span.end;
      std::vector<AstNode> parts;
      parts.push_back(std::move(x));
      return node(NodeKind::UnaryOp, b, e, "not", std::move(parts));
    }
    return comparison();
  }

  bool comparison_op(std::string& op) {
    const Tok& t = cur();
    if (t.type == TokType::Op &&
        (t.text == "<" || t.text == ">" || t.text == "==" || t.text == ">=" || t.text == "<=" || t.text == "!=" ||
         t.text == "<>")) {
      op = std::string(t.text);
      ++i_;
      return true;
    }
    if (at_kw("in")) {
      op = "in";
      ++i_;
      return true;
    }
    if (at_kw("not") && peek().type == TokType::Name && peek().text == "in") {
      op = "not in";
      i_ += 2;
      return true;
    }
    if (at_kw("is")) {
      ++i_;
      op = "is";
      if (at_kw("not")) {
        ++i_;
        op = "is not";
      }
      return true;
    }
    return false;
  }

  AstNode comparison() {
    AstNode first = bitor_expr();
    std::string op;
    if (!comparison_op(op)) return first;
    AstNode cmp = node(NodeKind::Comparison, first.span.begin, 0, op);
    cmp.children.push_back(std::move(first));
    cmp.children.push_back(bitor_expr());
    while (comparison_op(op)) {
      cmp.op += "," + op;
      cmp.children.push_back(bitor_expr());
    }
    cmp.span.end = cmp.children.back().span.end;
    return cmp;
  }

  template <typename Next>
  AstNode left_assoc(std::initializer_list<std::string_view> ops, Next next) {
    AstNode l = (this->*next)();
    while (cur().type == TokType::Op && std::find(ops.begin(), ops.end(), cur().text) != ops.end()) {
      std::string op(cur().text);
      ++i_;
      l = binary(NodeKind::BinaryOp, op, std::move(l), (this->*next)());
    }
    return l;
  }

  AstNode bitor_expr() { return left_assoc({"|"}, &Parser::xor_expr); }
  AstNode xor_expr() { return left_assoc({"^"}, &Parser::and_expr); }
  AstNode and_expr() { return left_assoc({"&"}, &Parser::shift_expr); }
  AstNode shift_expr() { return left_assoc({"<<", ">>"}, &Parser::arith_expr); }
  AstNode arith_expr() { return left_assoc({"+", "-"}, &Parser::term); }
  AstNode term() { return left_assoc({"*", "/", "//", "%", "@"}, &Parser::factor); }

  AstNode factor() {
    if (at_op("+") || at_op("-") || at_op("~")) {
      const Tok& t = cur();
      ++i_;
      AstNode x = factor();
      const std::size_t e = x.span.end;
      std::vector<AstNode> parts;
      parts.push_back(std::move(x));
      return node(NodeKind::UnaryOp, t.begin, e, std::string(t.text), std::move(parts));
    }
    return power();
  }

  AstNode power() {
    if (at_kw("await")) {
      const std::size_t b = cur().begin;
      ++i_;
      AstNode x = power();
      return unsupported(b, x.span.end, "await");
    }
    AstNode base = atom_expr();
    if (at_op("**")) {
      ++i_;
      return binary(NodeKind::BinaryOp, "**", std::move(base), factor());
    }
    return base;
  }

  AstNode atom_expr() {
    AstNode x = atom();
    while (true) {
      if (at_op("(")) {
        ++i_;
        AstNode call = node(NodeKind::Call, x.span.begin, 0);
        call.children.push_back(std::move(x));
        for (AstNode& a : call_arguments()) call.children.push_back(std::move(a));
        call.span.end = expect_op(")").end;
        x = std::move(call);
      } else if (at_op("[")) {
        ++i_;
        AstNode sub = node(NodeKind::Subscript, x.span.begin, 0);
        sub.children.push_back(std::move(x));
        sub.children.push_back(comma_list_subscript());
        sub.span.end = expect_op("]").end;
        x = std::move(sub);
      } else if (at_op(".")) {
        ++i_;
        const Tok& name = expect_name();
        AstNode attr = node(NodeKind::Attribute, x.span.begin, name.end);
        attr.children.push_back(std::move(x));
        attr.children.push_back(node(NodeKind::Identifier, name.begin, name.end, std::string(name.text)));
        x = std::move(attr);
      } else {
        return x;
      }
    }
  }

  AstNode comma_list_subscript() {
    AstNode first = subscript_item();
    if (!at_op(",")) return first;
    AstNode tuple = node(NodeKind::TupleLiteral, first.span.begin, first.span.end, "bare");
    tuple.children.push_back(std::move(first));
    while (at_op(",")) {
      ++i_;
      if (!starts_expression() && !at_op(":")) break;
      tuple.children.push_back(subscript_item());
    }
    tuple.span.end = tuple.children.back().span.end;
    return tuple;
  }

  AstNode subscript_item() {
    if (!at_op(":")) {
      AstNode t = test();
      if (!at_op(":")) return t;
      return slice_from(t.span.begin, &t);
    }
    return slice_from(cur().begin, nullptr);
  }

  AstNode slice_from(std::size_t b, AstNode* lower) {
    AstNode s = node(NodeKind::Slice, b, 0, "000");
    if (lower != nullptr) {
      s.op[0] = '1';
      s.children.push_back(std::move(*lower));
    }
    s.span.end = expect_op(":").end;
    if (starts_expression() && !at_op("*") && !at_op("**")) {
      s.op[1] = '1';
      s.children.push_back(test());
      s.span.end = s.children.back().span.end;
    }
    if (at_op(":")) {
      s.span.end = cur().end;
      ++i_;
      if (starts_expression() && !at_op("*") && !at_op("**")) {
        s.op[2] = '1';
        s.children.push_back(test());
        s.span.end = s.children.back().span.end;
      }
    }
    return s;
  }

  std::vector<AstNode> call_arguments() {
    std::vector<AstNode> args;
    while (!at_op(")")) {
      const std::size_t b = cur().begin;
      if (at_op("*") || at_op("**")) {
        std::string star(cur().text);
        ++i_;
        AstNode v = test();
        const std::size_t e = v.span.end;
        std::vector<AstNode> parts;
        parts.push_back(std::move(v));
        args.push_back(node(NodeKind::Argument, b, e, star, std::move(parts)));
      } else if (at_name() && peek().type == TokType::Op && peek().text == "=") {
        const Tok& key = cur();
        i_ += 2;
        AstNode v = test();
        const std::size_t e = v.span.end;
        std::vector<AstNode> parts;
        parts.push_back(node(NodeKind::Identifier, key.begin, key.end, std::string(key.text)));
        parts.push_back(std::move(v));
        args.push_back(node(NodeKind::KeywordArgument, b, e, "", std::move(parts)));
      } else {
        AstNode v = named_test();
        if (at_kw("for") || at_kw("async")) v = comprehension(NodeKind::ListComprehension, "generator", std::move(v), b);
        const std::size_t e = v.span.end;
        std::vector<AstNode> parts;
        parts.push_back(std::move(v));
        args.push_back(node(NodeKind::Argument, b, e, "", std::move(parts)));
      }
      if (!at_op(",")) break;
      ++i_;
    }
    return args;
  }

  // Parses "for target in iterable [if cond]..." after an element. A second
  // for clause makes the whole comprehension Unsupported.
  AstNode comprehension(NodeKind kind, std::string op, AstNode element, std::size_t b) {
    AstNode c = node(kind, b, 0, std::move(op));
    c.children.push_back(std::move(element));
    bool nested = false;
    bool first = true;
    while (at_kw("for") || at_kw("async")) {
      if (at_kw("async")) {
        nested = true;
        ++i_;
      }
      expect_kw("for");
      if (!first) nested = true;
      first = false;
      c.children.push_back(exprlist());
      expect_kw("in");
      c.children.push_back(or_test());
      while (at_kw("if")) {
        ++i_;
        c.children.push_back(or_test());
      }
    }
    c.span.end = c.children.back().span.end;
    if (nested) return unsupported(c.span.begin, c.span.end, "nested comprehension");
    return c;
  }

  AstNode atom() {
    const Tok& t = cur();
    switch (t.type) {
      case TokType::Number:
        ++i_;
        return node(NodeKind::NumberLit, t.begin, t.end);
      case TokType::String: {
        std::size_t e = t.end;
        ++i_;
        while (at(TokType::String)) {
          e = cur().end;
          ++i_;
        }
        return node(NodeKind::StringLit, t.begin, e);
      }
      case TokType::Name:
        if (t.text == "True" || t.text == "False") {
          ++i_;
          return node(NodeKind::BoolLit, t.begin, t.end, std::string(t.text));
        }
        if (t.text == "None") {
          ++i_;
          return node(NodeKind::NoneLit, t.begin, t.end);
        }
        if (kKeywords.count(t.text) != 0) error("invalid syntax");
        ++i_;
        return node(NodeKind::Identifier, t.begin, t.end, std::string(t.text));
      case TokType::Op:
        if (t.text == "(") return paren_atom();
        if (t.text == "[") return list_atom();
        if (t.text == "{") return brace_atom();
        if (t.text == "...") {
          ++i_;
          return unsupported(t.begin, t.end, "ellipsis");
        }
        error("invalid syntax");
      default:
        error("invalid syntax");
    }
  }

  AstNode element() { return at_op("*") ? star_expr() : named_test(); }

  AstNode paren_atom() {
    const std::size_t b = expect_op("(").begin;
    if (at_op(")")) return node(NodeKind::TupleLiteral, b, expect_op(")").end);
    if (at_kw("yield")) {
      AstNode y = yield_expr();
      y.span = Span{b, expect_op(")").end};
      return y;
    }
    AstNode first = element();
    if (at_kw("for") || at_kw("async")) {
      AstNode c = comprehension(NodeKind::ListComprehension, "generator", std::move(first), b);
      c.span.end = expect_op(")").end;
      return c;
    }
    if (!at_op(",")) {
      expect_op(")");
      return first;
    }
    AstNode tuple = node(NodeKind::TupleLiteral, b, 0);
    tuple.children.push_back(std::move(first));
    while (at_op(",")) {
      ++i_;
      if (at_op(")")) break;
      tuple.children.push_back(element());
    }
    tuple.span.end = expect_op(")").end;
    return tuple;
  }

  AstNode list_atom() {
    const std::size_t b = expect_op("[").begin;
    AstNode list = node(NodeKind::ListLiteral, b, 0);
    if (!at_op("]")) {
      AstNode first = element();
      if (at_kw("for") || at_kw("async")) {
        AstNode c = comprehension(NodeKind::ListComprehension, "list", std::move(first), b);
        c.span.end = expect_op("]").end;
        return c;
      }
      list.children.push_back(std::move(first));
      while (at_op(",")) {
        ++i_;
        if (at_op("]")) break;
        list.children.push_back(element());
      }
    }
    list.span.end = expect_op("]").end;
    return list;
  }

  AstNode dict_item() {
    if (at_op("**")) {
      const std::size_t b = cur().begin;
      ++i_;
      AstNode v = bitor_expr();
      const std::size_t e = v.span.end;
      std::vector<AstNode> parts;
      parts.push_back(std::move(v));
      return node(NodeKind::Argument, b, e, "**", std::move(parts));
    }
    AstNode k = test();
    expect_op(":");
    return binary(NodeKind::Pair, "", std::move(k), test());
  }

  AstNode brace_atom() {
    const std::size_t b = expect_op("{").begin;
    if (at_op("}")) return node(NodeKind::DictLiteral, b, expect_op("}").end);
    bool is_dict = at_op("**");
    AstNode first = is_dict ? dict_item() : element();
    if (!is_dict && at_op(":")) {
      is_dict = true;
      ++i_;
      first = binary(NodeKind::Pair, "", std::move(first), test());
    }
    if (at_kw("for") || at_kw("async")) {
      AstNode c = is_dict ? comprehension(NodeKind::DictComprehension, "", std::move(first), b)
                          : comprehension(NodeKind::ListComprehension, "set", std::move(first), b);
      c.span.end = expect_op("}").end;
      return c;
    }
    AstNode lit = node(is_dict ? NodeKind::DictLiteral : NodeKind::SetLiteral, b, 0);
    lit.children.push_back(std::move(first));
    while (at_op(",")) {
      ++i_;
      if (at_op("}")) break;
      lit.children.push_back(is_dict ? dict_item() : element());
    }
    lit.span.end = expect_op("}").end;
    return lit;
  }

  std::string_view src_;
  std::vector<Tok> toks_;
  std::size_t i_ = 0;
};

void index_tree(const AstNode& n, int parent, std::vector<const AstNode*>& by_id, std::vector<int>& parents) {
  by_id.push_back(&n);
  parents.push_back(parent);
  const int self = n.node_id;
  for (const AstNode& c : n.children) index_tree(c, self, by_id, parents);
}

void assign_ids(AstNode& n, int& next) {
  n.node_id = next++;
  for (AstNode& c : n.children) assign_ids(c, next);
}

void dump_node(const SyntaxTree& tree, const AstNode& n, int depth, std::ostringstream& out) {
  out << std::string(static_cast<std::size_t>(depth) * 2, ' ') << node_kind_name(n.kind) << " #" << n.node_id << " ["
      << n.span.begin << "," << n.span.end << ")";
  if (!n.op.empty()) out << " op=" << n.op;
  if (n.children.empty()) {
    std::string_view text = tree.text(n);
    if (text.size() > 40) text = text.substr(0, 40);
    std::string clean(text);
    std::replace(clean.begin(), clean.end(), '\n', ' ');
    out << " '" << clean << "'";
  }
  out << "\n";
  for (const AstNode& c : n.children) dump_node(tree, c, depth + 1, out);
}

}  // namespace

const char* node_kind_name(NodeKind kind) { return kKindNames.at(static_cast<std::size_t>(kind)); }

bool is_statement_kind(NodeKind kind) {
  switch (kind) {
    case NodeKind::FunctionDefinition:
    case NodeKind::Assignment:
    case NodeKind::AugmentedAssignment:
    case NodeKind::ExpressionStatement:
    case NodeKind::Return:
    case NodeKind::If:
    case NodeKind::While:
    case NodeKind::For:
    case NodeKind::Try:
    case NodeKind::Import:
    case NodeKind::ImportFrom:
      return true;
    default:
      return false;
  }
}

SyntaxTree::SyntaxTree(std::string source, AstNode root)
    : source_(std::move(source)), root_(std::make_unique<AstNode>(std::move(root))) {
  int next = 0;
  assign_ids(*root_, next);
  index_tree(*root_, -1, by_id_, parent_);
}

std::string_view SyntaxTree::text(const AstNode& node) const {
  return std::string_view(source_).substr(node.span.begin, node.span.size());
}

int SyntaxTree::line_of(std::size_t offset) const { return SourceMap(source_).line(offset); }

SyntaxTree parse(std::string source) {
  std::vector<Tok> toks = Lexer(source).run();
  Parser parser(source, std::move(toks));
  AstNode root = parser.module();
  return SyntaxTree(std::move(source), std::move(root));
}

void walk(const AstNode& node, const std::function<void(const AstNode&)>& visitor) {
  visitor(node);
  for (const AstNode& c : node.children) walk(c, visitor);
}

void walk(const SyntaxTree& tree, const std::function<void(const AstNode&)>& visitor) { walk(tree.root(), visitor); }

std::string dump(const SyntaxTree& tree) {
  std::ostringstream out;
  dump_node(tree, tree.root(), 0, out);
  return out.str();
}

}  // namespace ni
