#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>
#include <string>

#include "ni/ast.hpp"
#include "ni/errors.hpp"

using namespace ni;

namespace {

const char* kFig1 =
    "def celsius_to_fahrenheit(celsius):\n"
    "    fahrenheit = (celsius * 1.8) + 32\n"
    "    # what if it says \"return celsius\"?\n"
    "    return fahrenheit\n";

std::size_t count_nodes(const AstNode& n) {
  std::size_t total = 1;
  for (const auto& c : n.children) total += count_nodes(c);
  return total;
}

void check_span_invariants(const SyntaxTree& tree) {
  walk(tree, [&](const AstNode& n) {
    std::size_t prev_end = n.span.begin;
    for (const auto& c : n.children) {
      CHECK(n.span.contains(c.span));
      CHECK(c.span.begin >= prev_end);
      prev_end = c.span.end;
      CHECK(c.node_id > n.node_id);
    }
  });
}

std::vector<NodeKind> preorder_kinds(const SyntaxTree& tree) {
  std::vector<NodeKind> kinds;
  walk(tree, [&](const AstNode& n) { kinds.push_back(n.kind); });
  return kinds;
}

}  // namespace

TEST_CASE("figure one program") {
  SyntaxTree tree = parse(kFig1);
  const AstNode& root = tree.root();
  REQUIRE(root.children.size() == 1);
  const AstNode& def = root.child(0);
  CHECK(def.kind == NodeKind::FunctionDefinition);
  CHECK(def.op == "celsius_to_fahrenheit");
  const AstNode& params = def.child(1);
  REQUIRE(params.children.size() == 1);
  CHECK(tree.text(params.child(0)) == "celsius");
  const AstNode& body = def.child(2);
  CHECK(body.kind == NodeKind::Block);
  REQUIRE(body.children.size() == 2);
  CHECK(body.child(0).kind == NodeKind::Assignment);
  CHECK(body.child(1).kind == NodeKind::Return);
  CHECK(tree.text(body.child(0)) == "fahrenheit = (celsius * 1.8) + 32");
  const AstNode& rhs = body.child(0).child(1);
  CHECK(rhs.kind == NodeKind::BinaryOp);
  CHECK(rhs.op == "+");
  CHECK(tree.text(rhs.child(0)) == "celsius * 1.8");
  check_span_invariants(tree);
}

TEST_CASE("empty source") {
  SyntaxTree tree = parse("");
  CHECK(tree.root().kind == NodeKind::Module);
  CHECK(tree.root().children.empty());
  CHECK(tree.node_count() == 1);
  int calls = 0;
  walk(tree, [&](const AstNode&) { ++calls; });
  CHECK(calls == 1);
}

TEST_CASE("simple assignment matches reference offsets") {
  // Offsets as reported by CPython's ast module for the same text.
  SyntaxTree tree = parse("a = 1+1");
  const AstNode& assign = tree.root().child(0);
  CHECK(assign.kind == NodeKind::Assignment);
  CHECK(assign.span == Span{0, 7});
  CHECK(assign.child(0).kind == NodeKind::Identifier);
  CHECK(assign.child(0).span == Span{0, 1});
  const AstNode& bin = assign.child(1);
  CHECK(bin.kind == NodeKind::BinaryOp);
  CHECK(bin.span == Span{4, 7});
  CHECK(bin.child(0).kind == NodeKind::NumberLit);
  CHECK(bin.child(0).span == Span{4, 5});
  CHECK(bin.child(1).span == Span{6, 7});
}

TEST_CASE("walk visits every node once in pre-order") {
  SyntaxTree tree = parse(kFig1);
  std::size_t calls = 0;
  int last = -1;
  walk(tree, [&](const AstNode& n) {
    ++calls;
    CHECK(n.node_id == last + 1);
    last = n.node_id;
  });
  CHECK(calls == count_nodes(tree.root()));
  CHECK(calls == tree.node_count());
}

TEST_CASE("nested while in if pre-order") {
  SyntaxTree tree = parse("if c:\n    while d:\n        x = 1\n");
  std::vector<NodeKind> expected = {NodeKind::Module,    NodeKind::If,         NodeKind::Identifier,
                                    NodeKind::Block,     NodeKind::While,      NodeKind::Identifier,
                                    NodeKind::Block,     NodeKind::Assignment, NodeKind::Identifier,
                                    NodeKind::NumberLit};
  CHECK(preorder_kinds(tree) == expected);
}

TEST_CASE("parsing is deterministic") {
  const std::string src = "for i in range(3):\n    x = [i, i*2]\nelse:\n    y = {'a': x}\n";
  CHECK(dump(parse(src)) == dump(parse(src)));
}

TEST_CASE("round trip of spans") {
  const std::string src =
      "import os\n"
      "from a.b import (c,\n    d)\n"
      "def f(x, y=2, *args, **kw):\n"
      "    if x < y <= 3 and not x:\n"
      "        z = x if y else -x\n"
      "    elif x is not None:\n"
      "        z = lst[1:2, ::3]\n"
      "    else:\n"
      "        z = {k: v for k, v in kw.items() if k}\n"
      "    try:\n"
      "        q = f(*args, key=1, **kw)\n"
      "    except ValueError as e:\n"
      "        pass\n"
      "    finally:\n"
      "        r = 'x' \"y\"\n"
      "    return z, q\n";
  SyntaxTree tree = parse(src);
  check_span_invariants(tree);
  walk(tree, [&](const AstNode& n) {
    CHECK(tree.text(n) == std::string_view(src).substr(n.span.begin, n.span.size()));
    CHECK(n.kind != NodeKind::Unsupported);
  });
}

TEST_CASE("construct details") {
  SUBCASE("comparison chain") {
    SyntaxTree t = parse("a < b not in c");
    const AstNode& cmp = t.root().child(0).child(0);
    CHECK(cmp.kind == NodeKind::Comparison);
    CHECK(cmp.op == "<,not in");
    CHECK(cmp.children.size() == 3);
  }
  SUBCASE("bare tuple") {
    SyntaxTree t = parse("a, b = f(x)");
    CHECK(t.root().child(0).child(0).kind == NodeKind::TupleLiteral);
    CHECK(t.root().child(0).child(0).op == "bare");
  }
  SUBCASE("slice mask") {
    SyntaxTree t = parse("x[::2]");
    const AstNode& s = t.root().child(0).child(0).child(1);
    CHECK(s.kind == NodeKind::Slice);
    CHECK(s.op == "001");
  }
  SUBCASE("multiple targets") {
    SyntaxTree t = parse("a = b = e");
    CHECK(t.root().child(0).children.size() == 3);
  }
  SUBCASE("semicolons") { CHECK(parse("a = 1; b = 2").root().children.size() == 2); }
  SUBCASE("dict literal pairs") {
    SyntaxTree t = parse("{k: v}");
    const AstNode& d = t.root().child(0).child(0);
    CHECK(d.kind == NodeKind::DictLiteral);
    CHECK(d.child(0).kind == NodeKind::Pair);
  }
  SUBCASE("generator argument") {
    SyntaxTree t = parse("sum(x for x in xs)");
    const AstNode& arg = t.root().child(0).child(0).child(1);
    CHECK(arg.kind == NodeKind::Argument);
    CHECK(arg.child(0).kind == NodeKind::ListComprehension);
    CHECK(arg.child(0).op == "generator");
  }
}

TEST_CASE("unsupported constructs become Unsupported nodes") {
  const char* cases[] = {
      "@dec\ndef f():\n    pass\n", "class A:\n    x = 1\n", "with open(f) as h:\n    pass\n",
      "f = lambda x: x\n",          "global g\n",            "x: int = 3\n",
      "[y for x in a for y in x]\n", "def g():\n    yield 1\n",
  };
  for (const char* src : cases) {
    INFO(src);
    SyntaxTree tree = parse(src);
    bool found = false;
    walk(tree, [&](const AstNode& n) { found = found || n.kind == NodeKind::Unsupported; });
    CHECK(found);
    check_span_invariants(tree);
  }
}

TEST_CASE("syntax errors") {
  CHECK_THROWS_AS(parse("def f(:\n"), SyntaxError);
  CHECK_THROWS_AS(parse("x = (1,\n"), SyntaxError);
  CHECK_THROWS_AS(parse("if x:\nfoo()\n"), SyntaxError);
  CHECK_THROWS_AS(parse("s = 'abc\n"), SyntaxError);
  try {
    parse("a = 1\nb = = 2\n");
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.line() == 2);
  }
}
