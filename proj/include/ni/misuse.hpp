#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ni/batch.hpp"
#include "ni/corpus.hpp"
#include "ni/model.hpp"
#include "ni/objectives.hpp"

namespace ni {

struct MisuseOptions {
  BatchOptions batch;  // snapshots are forced on
  int max_returns = 256;
};

// A batch of misuse-labelled scripts run once, with labels resolved against
// each run.
struct MisuseBatch {
  BatchRun run;
  std::vector<MisuseLabel> labels;
  std::vector<GroundedLabel> truth;
  std::vector<std::string> ids;
  std::vector<char> usable;  // run usable and label grounded
  long skipped = 0;
};

MisuseBatch run_misuse_batch(const Model& model, ad::Tape& tape, std::span<const Script* const> scripts,
                             const MisuseOptions& options);

// Head outputs over the call-return sequence of every usable script.
struct HeadOutputs {
  std::vector<int> scripts;  // batch indices, in order
  std::vector<int> lengths;  // returns used per script
  ad::Var kappa;             // one logit per script
  ad::Var eta;               // one logit per return, scripts concatenated
  ad::Var psi;               // one logit per return, scripts concatenated
  std::vector<int> offsets;  // first row of each script in eta/psi
};

// With `with_eta` false the contamination head is not evaluated.
HeadOutputs misuse_heads(const Model& model, ad::Tape& tape, MisuseBatch& batch, int max_returns, bool with_eta);

struct MisuseLosses {
  LossTerm l1;  // code classification
  LossTerm l2;  // per-return contamination
  LossTerm l3;  // source call
  LossTerm l4;  // misused argument
  LossTerm l5;  // repair
  ad::Var total;
  double total_value() const { return total.valid() ? total.scalar() : 0.0; }
};

MisuseLosses misuse_losses(const Model& model, ad::Tape& tape, MisuseBatch& batch, const MisuseOptions& options);

struct MisusePrediction {
  std::string script_id;
  double p_misuse = 0.0;
  int call_record = -1;
  int arg_index = -1;
  std::string repair_name;
  std::string explanation_path;
};

struct MisuseScores {
  // Per usable script, parallel arrays.
  std::vector<double> p_misuse;
  std::vector<char> label;
  long call_correct = 0;
  long arg_correct = 0;     // on the true source call
  long repair_correct = 0;  // on the true source call and argument
  long joint_correct = 0;   // unforced chain: call, argument and repair all right
  long misuse_scripts = 0;
  double repair_chance_sum = 0.0;  // sum of 1 / |snapshot|
  long skipped = 0;

  void merge(const MisuseScores& other);
  double auc() const;
  double classification_accuracy() const;
  double call_accuracy() const;
  double arg_accuracy() const;
  double repair_accuracy() const;
  double repair_chance() const;
  double joint_accuracy() const;
};

// Inference: κ for the probability, ψ for the call, τ for the argument, π over
// the snapshot for the repair. η is never consulted. Scores use the labels.
MisuseScores misuse_infer(const Model& model, ad::Tape& tape, MisuseBatch& batch, const MisuseOptions& options,
                          std::vector<MisusePrediction>* predictions);

// Area under the ROC curve by the rank statistic, ties counted as one half.
double roc_auc(std::span<const double> scores, std::span<const char> labels);

std::string to_json(const MisusePrediction& p);

}  // namespace ni
