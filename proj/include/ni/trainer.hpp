#pragma once

#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "json.hpp"
#include "ni/config.hpp"
#include "ni/corpus.hpp"
#include "ni/misuse.hpp"
#include "ni/model.hpp"
#include "ni/objectives.hpp"

namespace ni {

// Vocabulary from the training sources, then freshly initialised parameters.
std::unique_ptr<Model> make_model(const Config& config, const std::vector<Script>& train);

BatchOptions batch_options(const Config& config);
ObjectiveOptions objective_options(const Config& config);
MisuseOptions misuse_options(const Config& config);

struct StepMetrics {
  long step = 0;
  double L1 = 0, L2 = 0, L3 = 0;
  double acc1 = 0, acc2 = 0, acc3 = 0;
  long scripts_skipped = 0;
  long lambda_calls = 0;
};

nlohmann::ordered_json to_json(const StepMetrics& m);

// Pooled accuracies over many batches: correct / terms per loss.
struct EvalMetrics {
  double L1 = 0, L2 = 0, L3 = 0;  // mean over batches with the term present
  long correct1 = 0, terms1 = 0;
  long correct2 = 0, terms2 = 0;
  long correct3 = 0, terms3 = 0;
  long scripts = 0;
  long scripts_skipped = 0;
  long lambda_calls = 0;

  double acc1() const { return terms1 ? static_cast<double>(correct1) / terms1 : 0.0; }
  double acc2() const { return terms2 ? static_cast<double>(correct2) / terms2 : 0.0; }
  double acc3() const { return terms3 ? static_cast<double>(correct3) / terms3 : 0.0; }
};

nlohmann::ordered_json to_json(const EvalMetrics& m);

// Batch order for one epoch: a seeded Fisher-Yates shuffle.
std::vector<int> epoch_order(std::uint64_t seed, int epoch, int n);

struct TrainOutcome {
  long steps = 0;
  bool budget_exhausted = false;
  double seconds = 0.0;
};

// One optimizer step per batch over `epochs` shuffled passes. Writes the
// resolved config as the first log line, then one StepMetrics line per step.
// Stops early (after a completed step) once time_budget_s is exceeded.
TrainOutcome train(Model& model, const Config& config, const std::vector<Script>& corpus, std::ostream* log);

// Fixed batches in corpus order, losses sampled from a seed that depends only
// on the config seed and the batch index. No parameter changes.
EvalMetrics evaluate(const Model& model, const Config& config, const std::vector<Script>& corpus);

struct MisuseStepMetrics {
  long step = 0;
  double L[5] = {0, 0, 0, 0, 0};
  double acc[5] = {0, 0, 0, 0, 0};
  long scripts_skipped = 0;
  long lambda_calls = 0;
};

nlohmann::ordered_json to_json(const MisuseStepMetrics& m);

TrainOutcome misuse_train(Model& model, const Config& config, const std::vector<Script>& corpus, std::ostream* log);

MisuseScores misuse_evaluate(const Model& model, const Config& config, const std::vector<Script>& corpus,
                             std::vector<MisusePrediction>* predictions);

nlohmann::ordered_json to_json(const MisuseScores& s);

}  // namespace ni
