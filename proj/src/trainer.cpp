#include "ni/trainer.hpp"

#include <chrono>

#include "ni/params.hpp"
#include "ni/tokenizer.hpp"

namespace ni {

std::unique_ptr<Model> make_model(const Config& config, const std::vector<Script>& train) {
  std::vector<std::string> sources;
  sources.reserve(train.size());
  for (const Script& s : train) sources.push_back(s.code);
  Vocabulary vocab = Vocabulary::build(sources, config.vocab_min_count, config.vocab_size, config.oov_buckets);
  return std::make_unique<Model>(model_config(config), std::move(vocab));
}

BatchOptions batch_options(const Config& config) {
  BatchOptions o;
  o.pool = config.effective_pool();
  o.lambda_cap = config.lambda_cap_per_batch;
  o.max_args = config.max_args;
  return o;
}

ObjectiveOptions objective_options(const Config& config) {
  ObjectiveOptions o;
  o.negatives_k = config.K_negatives;
  o.samples_per_loss = config.samples_per_loss;
  o.l2_whole_list = config.l2_whole_list;
  return o;
}

MisuseOptions misuse_options(const Config& config) {
  MisuseOptions o;
  o.batch = batch_options(config);
  o.max_returns = config.max_returns;
  return o;
}

nlohmann::ordered_json to_json(const StepMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["L1"] = m.L1;
  j["L2"] = m.L2;
  j["L3"] = m.L3;
  j["acc1"] = m.acc1;
  j["acc2"] = m.acc2;
  j["acc3"] = m.acc3;
  j["scripts_skipped"] = m.scripts_skipped;
  j["lambda_calls"] = m.lambda_calls;
  return j;
}

nlohmann::ordered_json to_json(const EvalMetrics& m) {
  nlohmann::ordered_json j;
  j["L1"] = m.L1;
  j["L2"] = m.L2;
  j["L3"] = m.L3;
  j["acc1"] = m.acc1();
  j["acc2"] = m.acc2();
  j["acc3"] = m.acc3();
  j["scripts"] = m.scripts;
  j["scripts_skipped"] = m.scripts_skipped;
  j["lambda_calls"] = m.lambda_calls;
  return j;
}

std::vector<int> epoch_order(std::uint64_t seed, int epoch, int n) {
  std::mt19937_64 rng(mix_seed(seed ^ 0x5eed0f0bULL, static_cast<std::uint64_t>(epoch)));
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

long count_skipped(const BatchRun& run) {
  long n = 0;
  for (const ScriptRun& s : run.scripts) n += s.usable() ? 0 : 1;
  return n;
}

AdamWConfig adam_config(const Config& config, long total_steps) {
  AdamWConfig a;
  a.lr = config.lr;
  a.warmup_frac = config.warmup_frac;
  a.weight_decay = config.weight_decay;
  a.clip_norm = config.clip_norm;
  a.total_steps = std::max(1L, total_steps);
  return a;
}

std::vector<std::vector<const Script*>> make_batches(const std::vector<Script>& corpus, const std::vector<int>& order,
                                                     int batch_size) {
  std::vector<std::vector<const Script*>> out;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
    std::vector<const Script*> b;
    for (std::size_t k = i; k < std::min(order.size(), i + static_cast<std::size_t>(batch_size)); ++k) {
      b.push_back(&corpus[static_cast<std::size_t>(order[k])]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<BatchItem> items_of(const std::vector<const Script*>& batch) {
  std::vector<BatchItem> items;
  for (const Script* s : batch) items.push_back(BatchItem{&s->code, -1});
  return items;
}

void write_header(std::ostream* log, const Config& config, const char* mode) {
  if (!log) return;
  nlohmann::ordered_json j;
  j["mode"] = mode;
  j["config"] = config_to_json(config);
  *log << j.dump() << '\n';
  log->flush();
}

}  // namespace

TrainOutcome train(Model& model, const Config& config, const std::vector<Script>& corpus, std::ostream* log) {
  TrainOutcome out;
  const auto t0 = Clock::now();
  write_header(log, config, "train");
  const int n = static_cast<int>(corpus.size());
  const long per_epoch = (n + config.batch_size - 1) / config.batch_size;
  AdamW opt(adam_config(config, per_epoch * config.epochs));
  const BatchOptions bo = batch_options(config);
  const ObjectiveOptions oo = objective_options(config);
  for (int epoch = 0; epoch < config.epochs && !out.budget_exhausted; ++epoch) {
    for (const auto& batch : make_batches(corpus, epoch_order(config.seed, epoch, n), config.batch_size)) {
      ad::Tape tape;
      std::vector<BatchItem> items = items_of(batch);
      BatchRun run = run_batch(model, tape, items, bo);
      Losses losses = compute_losses(model, tape, run, oo, config.seed, static_cast<std::uint64_t>(out.steps));
      model.params().zero_grad();
      if (losses.total.valid()) tape.backward(losses.total);
      opt.step(model.params());

      StepMetrics m;
      m.step = out.steps;
      m.L1 = losses.l1.value();
      m.L2 = losses.l2.value();
      m.L3 = losses.l3.value();
      m.acc1 = losses.l1.accuracy();
      m.acc2 = losses.l2.accuracy();
      m.acc3 = losses.l3.accuracy();
      m.scripts_skipped = count_skipped(run);
      m.lambda_calls = run.lambda_calls;
      if (log) *log << to_json(m).dump() << '\n';
      ++out.steps;
      if (config.time_budget_s > 0 && since(t0) > config.time_budget_s) {
        out.budget_exhausted = true;
        break;
      }
    }
  }
  if (log) log->flush();
  out.seconds = since(t0);
  return out;
}

EvalMetrics evaluate(const Model& model, const Config& config, const std::vector<Script>& corpus) {
  EvalMetrics m;
  const int n = static_cast<int>(corpus.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  const BatchOptions bo = batch_options(config);
  const ObjectiveOptions oo = objective_options(config);
  long index = 0;
  long with[3] = {0, 0, 0};
  for (const auto& batch : make_batches(corpus, order, config.batch_size)) {
    ad::Tape tape;
    std::vector<BatchItem> items = items_of(batch);
    BatchRun run = run_batch(model, tape, items, bo);
    Losses losses = compute_losses(model, tape, run, oo, config.seed ^ 0xe7a1c0deULL, static_cast<std::uint64_t>(index++));
    m.scripts += static_cast<long>(batch.size());
    m.scripts_skipped += count_skipped(run);
    m.lambda_calls += run.lambda_calls;
    const LossTerm* terms[3] = {&losses.l1, &losses.l2, &losses.l3};
    double* sums[3] = {&m.L1, &m.L2, &m.L3};
    long* correct[3] = {&m.correct1, &m.correct2, &m.correct3};
    long* total[3] = {&m.terms1, &m.terms2, &m.terms3};
    for (int k = 0; k < 3; ++k) {
      if (!terms[k]->loss.valid()) continue;
      *sums[k] += terms[k]->value();
      ++with[k];
      *correct[k] += terms[k]->correct;
      *total[k] += terms[k]->terms;
    }
  }
  if (with[0]) m.L1 /= static_cast<double>(with[0]);
  if (with[1]) m.L2 /= static_cast<double>(with[1]);
  if (with[2]) m.L3 /= static_cast<double>(with[2]);
  return m;
}

nlohmann::ordered_json to_json(const MisuseStepMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  for (int k = 0; k < 5; ++k) j["L" + std::to_string(k + 1) + "m"] = m.L[k];
  for (int k = 0; k < 5; ++k) j["acc" + std::to_string(k + 1) + "m"] = m.acc[k];
  j["scripts_skipped"] = m.scripts_skipped;
  j["lambda_calls"] = m.lambda_calls;
  return j;
}

TrainOutcome misuse_train(Model& model, const Config& config, const std::vector<Script>& corpus, std::ostream* log) {
  TrainOutcome out;
  const auto t0 = Clock::now();
  write_header(log, config, "misuse-train");
  const int n = static_cast<int>(corpus.size());
  const long per_epoch = (n + config.batch_size - 1) / config.batch_size;
  AdamW opt(adam_config(config, per_epoch * config.epochs));
  const MisuseOptions mo = misuse_options(config);
  for (int epoch = 0; epoch < config.epochs && !out.budget_exhausted; ++epoch) {
    for (const auto& batch : make_batches(corpus, epoch_order(config.seed, epoch, n), config.batch_size)) {
      ad::Tape tape;
      MisuseBatch mb = run_misuse_batch(model, tape, batch, mo);
      MisuseLosses losses = misuse_losses(model, tape, mb, mo);
      model.params().zero_grad();
      if (losses.total.valid()) tape.backward(losses.total);
      opt.step(model.params());

      MisuseStepMetrics m;
      m.step = out.steps;
      const LossTerm* terms[5] = {&losses.l1, &losses.l2, &losses.l3, &losses.l4, &losses.l5};
      for (int k = 0; k < 5; ++k) {
        m.L[k] = terms[k]->value();
        m.acc[k] = terms[k]->accuracy();
      }
      m.scripts_skipped = mb.skipped;
      m.lambda_calls = mb.run.lambda_calls;
      if (log) *log << to_json(m).dump() << '\n';
      ++out.steps;
      if (config.time_budget_s > 0 && since(t0) > config.time_budget_s) {
        out.budget_exhausted = true;
        break;
      }
    }
  }
  if (log) log->flush();
  out.seconds = since(t0);
  return out;
}

MisuseScores misuse_evaluate(const Model& model, const Config& config, const std::vector<Script>& corpus,
                             std::vector<MisusePrediction>* predictions) {
  MisuseScores scores;
  const int n = static_cast<int>(corpus.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  const MisuseOptions mo = misuse_options(config);
  for (const auto& batch : make_batches(corpus, order, config.batch_size)) {
    ad::Tape tape;
    MisuseBatch mb = run_misuse_batch(model, tape, batch, mo);
    scores.merge(misuse_infer(model, tape, mb, mo, predictions));
  }
  return scores;
}

nlohmann::ordered_json to_json(const MisuseScores& s) {
  nlohmann::ordered_json j;
  j["scripts"] = static_cast<long>(s.p_misuse.size());
  j["misuse_scripts"] = s.misuse_scripts;
  j["skipped"] = s.skipped;
  j["auc"] = s.auc();
  j["classification_accuracy"] = s.classification_accuracy();
  j["call_accuracy"] = s.call_accuracy();
  j["argument_accuracy"] = s.arg_accuracy();
  j["repair_accuracy"] = s.repair_accuracy();
  j["repair_chance"] = s.repair_chance();
  j["joint_accuracy"] = s.joint_accuracy();
  return j;
}

}  // namespace ni
