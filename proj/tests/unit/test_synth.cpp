#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "ni/ast.hpp"
#include "ni/batch.hpp"
#include "ni/codegen.hpp"
#include "ni/dfg.hpp"
#include "ni/interpreter.hpp"
#include "ni/synth.hpp"

using namespace ni;

namespace {

std::vector<std::string> stored_names(const Interpreter& in) {
  std::set<std::string> out;
  for (const TraceEvent& e : in.trace()) {
    if (e.op != TraceOp::Store) continue;
    out.insert(e.operands.substr(0, e.operands.find(' ')));
  }
  return {out.begin(), out.end()};
}

void check_against_lowering(const SynthScript& s) {
  INFO(s.code);
  SyntaxTree tree = parse(s.code);
  InterpreterOptions io;
  io.misuse_node = identifier_at(tree, s.misuse_offset);
  if (s.has_misuse) REQUIRE(io.misuse_node >= 0);
  StructuralRun run = run_structural(tree, io);
  const Interpreter& in = *run.interp;
  CHECK(static_cast<int>(in.objects().size()) == s.oracle.object_count);
  CHECK(static_cast<int>(in.records().size()) == s.oracle.record_count);
  CHECK(static_cast<int>(run.statement_counts.size()) == s.oracle.statement_count);
  for (const auto& [node, count] : run.statement_counts) CHECK(count == 1);

  DataFlowGraph g = DataFlowGraph::build(in);
  std::vector<std::pair<int, int>> edges = g.edges();
  std::sort(edges.begin(), edges.end());
  CHECK(edges == s.oracle.dfg_edges);
  CHECK(g.acyclic());
  CHECK(stored_names(in) == s.oracle.bound_names);

  if (!s.has_misuse) return;
  const AbstractObject& view = in.object(s.oracle.misuse_object);
  CHECK(view.contaminated);
  CHECK(view.view_of >= 0);
  CHECK(tree.source().substr(static_cast<std::size_t>(s.misuse_offset), s.wrong_name.size()) == s.wrong_name);
  const LambdaRecord& src = in.records().at(static_cast<std::size_t>(s.oracle.source_record));
  CHECK(src.args.at(static_cast<std::size_t>(s.oracle.misused_arg_index)) == s.oracle.misuse_object);
  std::vector<char> reach = g.reachable_from(s.oracle.misuse_object);
  std::vector<int> contaminated;
  for (int i = 0; i < g.node_count(); ++i) {
    if (reach[static_cast<std::size_t>(i)]) contaminated.push_back(i);
  }
  CHECK(contaminated == s.oracle.contaminated);
}

}  // namespace

TEST_CASE("generated programs parse and match their own oracle") {
  for (const SynthScript& s : synthesize(7, 200)) check_against_lowering(s);
}

TEST_CASE("misuse programs match their oracle and keep the correct name in scope") {
  int with_misuse = 0;
  for (const SynthScript& s : synthesize_misuse(11, 200)) {
    check_against_lowering(s);
    if (!s.has_misuse) continue;
    ++with_misuse;
    CHECK(s.correct_name != s.wrong_name);
    CHECK(s.oracle.misused_arg_index >= 0);
  }
  CHECK(with_misuse > 60);
  CHECK(with_misuse < 140);
}

TEST_CASE("generation is deterministic per seed") {
  auto a = synthesize(3, 20);
  auto b = synthesize(3, 20);
  auto c = synthesize(4, 20);
  REQUIRE(a.size() == 20);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].code == b[i].code);
    differs = differs || a[i].code != c[i].code;
  }
  CHECK(differs);
}

TEST_CASE("statement budget is respected") {
  SynthOptions o;
  o.min_statements = 40;
  o.max_statements = 60;
  for (const SynthScript& s : synthesize(5, 30, o)) {
    CHECK(s.oracle.statement_count >= 40);
    CHECK(s.oracle.statement_count <= 60 + 6);
  }
}
