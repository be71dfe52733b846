#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "ni/ast.hpp"
#include "ni/builtins.hpp"
#include "ni/codegen.hpp"
#include "ni/interpreter.hpp"
#include "ni/model.hpp"
#include "ni/tokenizer.hpp"

using namespace ni;

namespace {

std::vector<std::string> texts(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  for (const Token& t : tokens) out.push_back(t.text);
  return out;
}

Model small_model(std::uint64_t seed = 3) {
  ModelConfig cfg;
  cfg.hidden = 8;
  cfg.encoder_heads = 2;
  cfg.executor_heads = 2;
  cfg.seed = seed;
  return Model(cfg, Vocabulary::build({"celsius fahrenheit to total count"}, 1, 100, 8));
}

ExecRequest random_request(ad::Tape& tape, std::mt19937_64& rng, int hidden, int contexts, int args) {
  std::normal_distribution<double> d(0.0, 1.0);
  auto vec = [&] {
    Matrix m(1, hidden);
    for (double& v : m.values()) v = d(rng);
    return tape.constant(m);
  };
  ExecRequest r;
  r.theta = vec();
  for (int i = 0; i < contexts; ++i) r.contexts.push_back(vec());
  for (int i = 0; i < args; ++i) {
    r.guessed.push_back(vec());
    r.executed.push_back(i % 2 ? vec() : r.guessed.back());
  }
  return r;
}

}  // namespace

TEST_CASE("identifiers split on underscores and case changes and share the span") {
  std::vector<Token> t = tokenize("celsius_to_fahrenheit = getHTTPResponse(x2)");
  CHECK(texts(t) == std::vector<std::string>{"celsius", "to", "fahrenheit", "=", "get", "http", "response", "(",
                                             "x2", ")"});
  CHECK(t[0].span.begin == 0);
  CHECK(t[2].span.end == 21);
  CHECK(t[4].span.begin == t[6].span.begin);
}

TEST_CASE("strings and comments become their words") {
  std::vector<Token> t = tokenize("s = 'hello world'  # a note\n");
  CHECK(texts(t) == std::vector<std::string>{"s", "=", "hello", "world", "a", "note"});
  CHECK(t[2].span.begin == 4);
  CHECK(t[3].span.end == 17);
}

TEST_CASE("vocabulary order, limits and out-of-vocabulary buckets") {
  Vocabulary v = Vocabulary::build({"b a b c b a", "a d"}, 2, 10, 4);
  REQUIRE(v.size() == 2);
  CHECK(v.token(0) == "a");
  CHECK(v.token(1) == "b");
  CHECK(v.rows() == 6);
  CHECK(v.id("a") == 0);
  const int oov = v.id("zzz");
  CHECK(oov >= v.size());
  CHECK(oov < v.rows());
  CHECK(v.id("zzz") == oov);

  Vocabulary capped = Vocabulary::build({"b a b c b a", "a d"}, 1, 1, 4);
  CHECK(capped.size() == 1);
}

TEST_CASE("vocabulary serialization round trip") {
  Vocabulary v = Vocabulary::build({"one two two three three three"}, 1, 10, 16);
  Vocabulary w = Vocabulary::deserialize(v.serialize());
  CHECK(w.size() == v.size());
  CHECK(w.hash() == v.hash());
  for (int i = 0; i < v.size(); ++i) CHECK(w.token(i) == v.token(i));
  CHECK(w.id("unseen") == v.id("unseen"));
  Vocabulary other = Vocabulary::build({"one two"}, 1, 10, 16);
  CHECK(other.hash() != v.hash());
}

TEST_CASE("builtin table holds the control-flow builtins") {
  for (const char* name : {"__if__", "__else__", "__while__", "__for_in__", "__end_for_iterator__",
                           "__compile_function__"}) {
    INFO(std::string(name));
    CHECK(builtin_table().find(name).has_value());
  }
  CHECK_FALSE(builtin_table().find("not_a_builtin").has_value());
}

TEST_CASE("model construction is deterministic in the seed") {
  Model a = small_model(5), b = small_model(5), c = small_model(6);
  auto pa = a.params().all();
  auto pb = b.params().all();
  auto pc = c.params().all();
  REQUIRE(pa.size() == pb.size());
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value == pb[i]->value);
    differs = differs || !(pa[i]->value == pc[i]->value);
  }
  CHECK(differs);
}

TEST_CASE("encoding several scripts together equals encoding each alone") {
  Model m = small_model();
  const std::string a = "fahrenheit = celsius * 1.8 + 32\n", b = "total = count(items)\nprint(total)\n";
  ad::Tape tape;
  std::vector<const std::string*> both = {&a, &b};
  std::vector<Encoded> joint = m.encode(tape, both);
  Encoded ea = m.encode_one(tape, a);
  Encoded eb = m.encode_one(tape, b);
  REQUIRE(joint.size() == 2);
  for (std::size_t i = 0; i < ea.tokens.size(); ++i) {
    for (int c = 0; c < m.hidden(); ++c) {
      CHECK(joint[0].rows.value()(joint[0].offset + static_cast<int>(i), c) == ea.rows.value()(ea.offset + static_cast<int>(i), c));
    }
  }
  for (std::size_t i = 0; i < eb.tokens.size(); ++i) {
    for (int c = 0; c < m.hidden(); ++c) {
      CHECK(joint[1].rows.value()(joint[1].offset + static_cast<int>(i), c) == eb.rows.value()(eb.offset + static_cast<int>(i), c));
    }
  }
}

TEST_CASE("pooling is a max over the donor tokens plus the type embedding") {
  Model m = small_model();
  const std::string src = "fahrenheit = celsius\n";
  ad::Tape tape;
  Encoded enc = m.encode_one(tape, src);
  const Span donor{0, 10};
  std::vector<int> rows = enc.rows_within(donor);
  REQUIRE(rows.size() == 1);
  ad::Var pooled = m.pool(tape, enc, donor, NodeKind::Identifier, false);
  ad::Var empty = m.pool(tape, enc, Span{10, 11}, NodeKind::Identifier, false);
  ad::Var other_kind = m.pool(tape, enc, donor, NodeKind::Call, false);
  Matrix type_id(1, m.hidden()), type_call(1, m.hidden());
  for (int c = 0; c < m.hidden(); ++c) {
    type_id(0, c) = pooled.value()(0, c) - enc.rows.value()(rows[0], c);
    type_call(0, c) = other_kind.value()(0, c) - enc.rows.value()(rows[0], c);
  }
  CHECK_FALSE(type_id == type_call);
  CHECK_FALSE(empty.value() == pooled.value());
}

TEST_CASE("executor results do not depend on batch composition") {
  Model m = small_model();
  std::mt19937_64 rng(11);
  ad::Tape tape;
  std::vector<ExecRequest> reqs = {random_request(tape, rng, 8, 0, 2), random_request(tape, rng, 8, 3, 0),
                                   random_request(tape, rng, 8, 1, 5), random_request(tape, rng, 8, 20, 16)};
  std::vector<ExecResult> together = m.execute(tape, reqs);
  REQUIRE(together.size() == reqs.size());
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    std::vector<ExecResult> alone = m.execute(tape, std::span<const ExecRequest>(&reqs[i], 1));
    CHECK(alone[0].ret.value() == together[i].ret.value());
    CHECK(alone[0].ret.rows() == 1);
    CHECK(alone[0].ret.cols() == 8);
    if (reqs[i].guessed.empty()) {
      CHECK_FALSE(together[i].arg_outputs.valid());
    } else {
      CHECK(alone[0].arg_outputs.value() == together[i].arg_outputs.value());
      CHECK(together[i].arg_outputs.rows() == static_cast<int>(reqs[i].guessed.size()));
    }
  }
}

TEST_CASE("executor output depends on the signature, the arguments and the contexts") {
  Model m = small_model();
  std::mt19937_64 rng(12);
  ad::Tape tape;
  ExecRequest base = random_request(tape, rng, 8, 1, 2);
  ExecRequest other_theta = base, other_arg = base, other_ctx = base;
  ExecRequest extra = random_request(tape, rng, 8, 1, 2);
  other_theta.theta = extra.theta;
  other_arg.executed[1] = extra.executed[1];
  other_ctx.contexts[0] = extra.contexts[0];
  std::vector<ExecRequest> reqs = {base, other_theta, other_arg, other_ctx};
  std::vector<ExecResult> r = m.execute(tape, reqs);
  CHECK_FALSE(r[0].ret.value() == r[1].ret.value());
  CHECK_FALSE(r[0].ret.value() == r[2].ret.value());
  CHECK_FALSE(r[0].ret.value() == r[3].ret.value());
}

TEST_CASE("neural interpretation assigns every object a vector") {
  Model m = small_model();
  const std::string src = "def conv(c):\n    f = mul(c, 1.8)\n    return f\nx = conv(t)\nif x > 3:\n    show(x)\n";
  SyntaxTree tree = parse(src);
  ad::Tape tape;
  Encoded enc = m.encode_one(tape, src);
  DirectChannel channel(m, tape);
  Interpreter in(tree, {}, NeuralContext{&m, &tape, &enc, &channel});
  StructuralRun reference = run_structural(tree);
  CodeGenerator gen(tree, in);
  gen.generate();
  CHECK(format_trace(in.trace()) == format_trace(reference.interp->trace()));
  CHECK(channel.calls() == static_cast<long>(in.records().size()));
  for (const LambdaRecord& r : in.records()) {
    ad::Var v = in.executed_or_guessed(r.result);
    REQUIRE(v.valid());
    CHECK(v.cols() == 8);
    CHECK(r.theta.valid());
  }
}
