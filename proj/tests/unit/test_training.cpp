#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fd_check.hpp"
#include "ni/batch.hpp"
#include "ni/checkpoint.hpp"
#include "ni/config.hpp"
#include "ni/corpus.hpp"
#include "ni/errors.hpp"
#include "ni/misuse.hpp"
#include "ni/objectives.hpp"
#include "ni/synth.hpp"
#include "ni/trainer.hpp"

using namespace ni;
namespace fs = std::filesystem;

namespace {

Config tiny_config() {
  Config c;
  c.H = 8;
  c.encoder_heads = 2;
  c.executor_heads = 2;
  c.encoder_layers = 1;
  c.executor_layers = 1;
  c.batch_size = 4;
  c.lambda_cap_per_batch = 100000;
  c.samples_per_loss = 8;
  return c;
}

std::vector<Script> corpus(std::uint64_t seed, int n, bool misuse = false) {
  SynthOptions o;
  o.min_statements = 3;
  o.max_statements = 6;
  std::vector<Script> out;
  for (const SynthScript& s : misuse ? synthesize_misuse(seed, n, o) : synthesize(seed, n, o)) {
    out.push_back(from_synth(s, misuse));
  }
  return out;
}

std::vector<BatchItem> items_of(const std::vector<Script>& scripts) {
  std::vector<BatchItem> items;
  for (const Script& s : scripts) items.push_back(BatchItem{&s.code, -1});
  return items;
}

// Optimizer moments are allocated on first use; an empty matrix means zeros.
bool same_moments(const Matrix& a, const Matrix& b) {
  auto zero = [](const Matrix& m) { return std::all_of(m.values().begin(), m.values().end(), [](double v) { return v == 0.0; }); };
  if (a.empty() || b.empty()) return zero(a) && zero(b);
  return a == b;
}

std::vector<const Script*> pointers(const std::vector<Script>& scripts) {
  std::vector<const Script*> p;
  for (const Script& s : scripts) p.push_back(&s);
  return p;
}

}  // namespace

TEST_CASE("pooled batches reproduce serial execution bit for bit") {
  Config c = tiny_config();
  std::vector<Script> scripts = corpus(41, 8);
  auto model = make_model(c, scripts);
  std::vector<BatchItem> items = items_of(scripts);
  BatchOptions pooled = batch_options(c);
  pooled.pool = 4;
  BatchOptions serial = pooled;
  serial.serial = true;

  ad::Tape t1, t2;
  BatchRun a = run_batch(*model, t1, items, pooled);
  BatchRun b = run_batch(*model, t2, items, serial);
  REQUIRE(a.scripts.size() == b.scripts.size());
  CHECK(a.lambda_calls == b.lambda_calls);
  CHECK(b.forwards == b.lambda_calls);
  CHECK(a.forwards < b.forwards);
  for (std::size_t i = 0; i < a.scripts.size(); ++i) {
    const Interpreter& x = *a.scripts[i].interp;
    const Interpreter& y = *b.scripts[i].interp;
    CHECK(format_trace(x.trace()) == format_trace(y.trace()));
    REQUIRE(x.records().size() == y.records().size());
    for (std::size_t r = 0; r < x.records().size(); ++r) {
      CHECK(x.object(x.records()[r].result).executed.value() == y.object(y.records()[r].result).executed.value());
    }
  }
  ObjectiveOptions oo = objective_options(c);
  Losses la = compute_losses(*model, t1, a, oo, 5, 0);
  Losses lb = compute_losses(*model, t2, b, oo, 5, 0);
  CHECK(la.l1.value() == lb.l1.value());
  CHECK(la.l2.value() == lb.l2.value());
  CHECK(la.l3.value() == lb.l3.value());
}

TEST_CASE("with every script in flight the forward count is the longest call sequence") {
  Config c = tiny_config();
  std::vector<Script> scripts = corpus(42, 6);
  auto model = make_model(c, scripts);
  std::vector<BatchItem> items = items_of(scripts);
  BatchOptions o = batch_options(c);
  o.pool = 6;
  ad::Tape tape;
  BatchRun run = run_batch(*model, tape, items, o);
  long longest = 0, total = 0;
  for (const Script& s : scripts) {
    longest = std::max<long>(longest, s.oracle->record_count);
    total += s.oracle->record_count;
  }
  CHECK(run.forwards == longest);
  CHECK(run.lambda_calls == total);
}

TEST_CASE("the call cap stops new scripts and truncates running ones") {
  Config c = tiny_config();
  std::vector<Script> scripts = corpus(43, 8);
  auto model = make_model(c, scripts);
  std::vector<BatchItem> items = items_of(scripts);
  BatchOptions o = batch_options(c);
  o.pool = 2;
  o.lambda_cap = 10;
  ad::Tape tape;
  BatchRun run = run_batch(*model, tape, items, o);
  CHECK(run.cap_reached);
  CHECK(run.lambda_calls <= 10);
  int truncated = 0, not_started = 0;
  for (const ScriptRun& s : run.scripts) {
    truncated += s.status == RunStatus::Truncated;
    not_started += s.status == RunStatus::NotStarted;
  }
  CHECK(truncated >= 1);
  CHECK(not_started >= 1);
}

TEST_CASE("losses are deterministic in (seed, step) and bounded by their term counts") {
  Config c = tiny_config();
  std::vector<Script> scripts = corpus(44, 4);
  auto model = make_model(c, scripts);
  std::vector<BatchItem> items = items_of(scripts);
  ObjectiveOptions oo = objective_options(c);
  auto run_once = [&](std::uint64_t step) {
    ad::Tape tape;
    BatchRun run = run_batch(*model, tape, items, batch_options(c));
    Losses l = compute_losses(*model, tape, run, oo, 9, step);
    return std::vector<double>{l.l1.value(), l.l2.value(), l.l3.value(), l.total_value(),
                               static_cast<double>(l.l1.terms), static_cast<double>(l.l1.correct)};
  };
  std::vector<double> a = run_once(0), b = run_once(0), d = run_once(1);
  CHECK(a == b);
  CHECK(a != d);
  CHECK(a[3] == doctest::Approx(a[0] + a[1] + a[2]).epsilon(1e-12));
  CHECK(a[5] <= a[4]);
}

TEST_CASE("return-variable classification chooses among K candidates with the truth included") {
  Config c = tiny_config();
  std::vector<Script> scripts = corpus(45, 4);
  auto model = make_model(c, scripts);
  std::vector<BatchItem> items = items_of(scripts);
  ad::Tape tape;
  BatchRun run = run_batch(*model, tape, items, batch_options(c));
  std::mt19937_64 rng(1);
  LossTerm l1 = loss_return_variable(*model, tape, run, objective_options(c), rng);
  REQUIRE(l1.terms > 0);
  // Untrained cross entropy over 8 classes stays near log 8.
  CHECK(l1.value() > 0.5 * std::log(8.0));
  CHECK(l1.value() < 2.0 * std::log(8.0));
}

TEST_CASE("finite differences through guesser, interpreter and executor") {
  Config c = tiny_config();
  std::vector<Script> scripts = corpus(46, 4);
  auto model = make_model(c, scripts);
  std::vector<BatchItem> items = items_of(scripts);
  ObjectiveOptions oo = objective_options(c);
  for (int which = 0; which < 3; ++which) {
    auto loss = [&](ad::Tape& tape) {
      BatchRun run = run_batch(*model, tape, items, batch_options(c));
      Losses l = compute_losses(*model, tape, run, oo, 3, 0);
      const LossTerm* t[3] = {&l.l1, &l.l2, &l.l3};
      INFO("L" << which + 1);
      REQUIRE(t[which]->loss.valid());
      return t[which]->loss;
    };
    auto report = fdcheck::check(model->params().all(), loss, 8, 100 + which);
    for (const auto& p : report.probes) {
      INFO("L" << which + 1 << " " << p.param << "[" << p.index << "] " << p.analytic << " vs " << p.numeric);
      CHECK(p.rel_error <= 1e-4);
    }
  }
}

TEST_CASE("finite differences through the misuse heads") {
  Config c = tiny_config();
  std::vector<Script> scripts = corpus(47, 4, true);
  auto model = make_model(c, scripts);
  std::vector<const Script*> ptrs = pointers(scripts);
  MisuseOptions mo = misuse_options(c);
  for (int which = 0; which < 5; ++which) {
    auto loss = [&](ad::Tape& tape) {
      MisuseBatch mb = run_misuse_batch(*model, tape, ptrs, mo);
      MisuseLosses l = misuse_losses(*model, tape, mb, mo);
      const LossTerm* t[5] = {&l.l1, &l.l2, &l.l3, &l.l4, &l.l5};
      REQUIRE(t[which]->loss.valid());
      return t[which]->loss;
    };
    auto report = fdcheck::check(model->params().all(), loss, 6, 200 + which);
    for (const auto& p : report.probes) {
      INFO("L" << which + 1 << "m " << p.param << "[" << p.index << "] " << p.analytic << " vs " << p.numeric);
      CHECK(p.rel_error <= 1e-4);
    }
  }
}

TEST_CASE("ROC AUC matches pair counting") {
  const std::vector<double> s = {0.9, 0.1, 0.4, 0.4, 0.7, 0.2};
  const std::vector<char> y = {1, 0, 1, 0, 0, 1};
  double wins = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      ++pairs;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  CHECK(roc_auc(s, y) == doctest::Approx(wins / pairs));
  const std::vector<double> perfect = {0.9, 0.8, 0.1};
  const std::vector<char> py = {1, 1, 0};
  CHECK(roc_auc(perfect, py) == 1.0);
  const std::vector<double> flat = {0.5, 0.5, 0.5, 0.5};
  const std::vector<char> fy = {1, 0, 1, 0};
  CHECK(roc_auc(flat, fy) == 0.5);
}

TEST_CASE("replaying a record with its own argument reproduces the return") {
  Config c = tiny_config();
  std::vector<Script> scripts = corpus(48, 4, true);
  auto model = make_model(c, scripts);
  std::vector<const Script*> ptrs = pointers(scripts);
  ad::Tape tape;
  MisuseBatch mb = run_misuse_batch(*model, tape, ptrs, misuse_options(c));
  int checked = 0;
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    if (!mb.usable[i]) continue;
    Interpreter& in = *mb.run.scripts[i].interp;
    for (const LambdaRecord& r : in.records()) {
      std::vector<ExecRequest> same = {in.request_for(r)};
      if (!r.args.empty()) same.push_back(in.request_for(r, std::make_pair(0, r.args[0])));
      std::vector<ExecResult> out = model->execute(tape, same);
      for (const ExecResult& e : out) CHECK(e.ret.value() == in.object(r.result).executed.value());
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("misuse losses: classification everywhere, the rest on misuse scripts only") {
  Config c = tiny_config();
  std::vector<Script> scripts = corpus(49, 8, true);
  auto model = make_model(c, scripts);
  MisuseOptions mo = misuse_options(c);

  std::vector<Script> clean;
  for (const Script& s : scripts) {
    if (!s.label->has_misuse) clean.push_back(s);
  }
  REQUIRE(!clean.empty());
  {
    ad::Tape tape;
    std::vector<const Script*> ptrs = pointers(clean);
    MisuseBatch mb = run_misuse_batch(*model, tape, ptrs, mo);
    MisuseLosses l = misuse_losses(*model, tape, mb, mo);
    CHECK(l.l1.terms == static_cast<int>(clean.size()));
    CHECK(l.l2.terms == 0);
    CHECK(l.l3.terms == 0);
    CHECK(l.l4.terms == 0);
    CHECK(l.l5.terms == 0);
  }
  ad::Tape tape;
  std::vector<const Script*> ptrs = pointers(scripts);
  MisuseBatch mb = run_misuse_batch(*model, tape, ptrs, mo);
  MisuseLosses l = misuse_losses(*model, tape, mb, mo);
  int misuse = 0;
  for (std::size_t i = 0; i < scripts.size(); ++i) misuse += mb.usable[i] && mb.labels[i].has_misuse;
  CHECK(l.l1.terms == static_cast<int>(scripts.size()) - static_cast<int>(mb.skipped));
  CHECK(l.l3.samples == misuse);
  CHECK(l.l4.samples == misuse);
  CHECK(l.l5.samples == misuse);
  CHECK(l.total_value() ==
        doctest::Approx(l.l1.value() + l.l2.value() + l.l3.value() + l.l4.value() + l.l5.value()).epsilon(1e-12));
}

TEST_CASE("misuse inference produces one prediction per usable script") {
  Config c = tiny_config();
  std::vector<Script> scripts = corpus(50, 8, true);
  auto model = make_model(c, scripts);
  std::vector<MisusePrediction> preds;
  MisuseScores s = misuse_evaluate(*model, c, scripts, &preds);
  CHECK(preds.size() == s.p_misuse.size());
  for (const MisusePrediction& p : preds) {
    CHECK(p.p_misuse >= 0.0);
    CHECK(p.p_misuse <= 1.0);
    CHECK(p.call_record >= 0);
    CHECK(p.arg_index >= 0);
    CHECK(p.explanation_path.find("-> argument") != std::string::npos);
  }
  CHECK(s.repair_chance() > 0.0);
  CHECK(s.repair_chance() <= 1.0);
}

TEST_CASE("config parsing, validation and JSON round trip") {
  Config c;
  set_config_value(c, "H", "16");
  set_config_value(c, "lr", "0.002");
  set_config_value(c, "l2_whole_list", "true");
  CHECK(c.H == 16);
  CHECK(c.lr == 0.002);
  CHECK(c.l2_whole_list);
  CHECK_THROWS_AS(set_config_value(c, "no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(set_config_value(c, "H", "abc"), ConfigError);

  const fs::path p = fs::temp_directory_path() / "ni_test_config.ini";
  {
    std::ofstream out(p);
    out << "# comment\n[model]\nH = 24\nencoder_heads = 3\n\n[train]\nepochs = 3\n";
  }
  Config f;
  load_config_file(f, p.string());
  CHECK(f.H == 24);
  CHECK(f.epochs == 3);
  CHECK_NOTHROW(validate(f));
  f.encoder_heads = 5;
  CHECK_THROWS_AS(validate(f), ConfigError);

  Config r = config_from_json(config_to_json(c));
  CHECK(config_to_json(r).dump() == config_to_json(c).dump());
  CHECK(config_keys().size() == config_to_json(c).size());
}

TEST_CASE("checkpoints restore parameters, optimizer state and vocabulary") {
  Config c = tiny_config();
  c.epochs = 1;
  std::vector<Script> scripts = corpus(51, 8);
  auto model = make_model(c, scripts);
  train(*model, c, scripts, nullptr);
  const fs::path p = fs::temp_directory_path() / "ni_test.ckpt";
  save_checkpoint(p.string(), *model, c);
  LoadedCheckpoint back = load_checkpoint(p.string());
  CHECK(config_to_json(back.config).dump() == config_to_json(c).dump());
  CHECK(back.model->vocab().hash() == model->vocab().hash());
  CHECK(back.model->params().step_count() == model->params().step_count());
  auto a = model->params().all();
  auto b = back.model->params().all();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value == b[i]->value);
    CHECK(same_moments(a[i]->first_moment, b[i]->first_moment));
    CHECK(same_moments(a[i]->second_moment, b[i]->second_moment));
  }
  CHECK(to_json(evaluate(*model, c, scripts)).dump() == to_json(evaluate(*back.model, c, scripts)).dump());

  std::string bytes;
  {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    bytes = s.str();
  }
  {
    std::ofstream out(p, std::ios::binary);
    out << bytes.substr(0, bytes.size() / 2);
  }
  CHECK_THROWS_AS(load_checkpoint(p.string()), ConfigError);
}

TEST_CASE("training is deterministic for a seed") {
  Config c = tiny_config();
  c.epochs = 1;
  std::vector<Script> scripts = corpus(52, 8);
  auto a = make_model(c, scripts);
  auto b = make_model(c, scripts);
  std::ostringstream la, lb;
  train(*a, c, scripts, &la);
  train(*b, c, scripts, &lb);
  CHECK(la.str() == lb.str());
  auto pa = a->params().all();
  auto pb = b->params().all();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("epoch order is a permutation that changes between epochs") {
  std::vector<int> e0 = epoch_order(1, 0, 50), e1 = epoch_order(1, 1, 50);
  CHECK(e0 != e1);
  std::sort(e0.begin(), e0.end());
  for (int i = 0; i < 50; ++i) CHECK(e0[static_cast<std::size_t>(i)] == i);
}
