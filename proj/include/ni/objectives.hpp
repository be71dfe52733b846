#pragma once

#include <cstdint>
#include <random>

#include "ni/autodiff.hpp"
#include "ni/batch.hpp"
#include "ni/model.hpp"

namespace ni {

struct ObjectiveOptions {
  int negatives_k = 8;       // candidates per return-variable sample, true one included
  int samples_per_loss = 64;  // per batch
  bool l2_whole_list = false;  // negatives replace every argument instead of one
};

// One loss term with its accuracy bookkeeping. `loss` is the mean over
// `terms` classification terms and is invalid when nothing was sampled.
struct LossTerm {
  ad::Var loss;
  int samples = 0;
  int terms = 0;
  int correct = 0;

  double value() const { return loss.valid() ? loss.scalar() : 0.0; }
  double accuracy() const { return terms ? static_cast<double>(correct) / terms : 0.0; }
};

struct Losses {
  LossTerm l1;
  LossTerm l2;
  LossTerm l3;
  ad::Var total;  // L1 + L2 + L3 over the present terms; invalid when all are empty

  double total_value() const { return total.valid() ? total.scalar() : 0.0; }
};

// Return-variable classification: the executed right-hand side of an
// assignment picks its left-hand name among K batch names.
LossTerm loss_return_variable(const Model& model, ad::Tape& tape, BatchRun& batch, const ObjectiveOptions& options,
                              std::mt19937_64& rng);
// Argument discrimination: real calls (label 1) against the same call with
// one argument swapped for a random batch object (label 0).
LossTerm loss_argument_discrimination(const Model& model, ad::Tape& tape, BatchRun& batch,
                                      const ObjectiveOptions& options, std::mt19937_64& rng);
// Data-flow discrimination: (ancestor, result) pairs against pairs without a
// path.
LossTerm loss_dataflow_discrimination(const Model& model, ad::Tape& tape, BatchRun& batch,
                                      const ObjectiveOptions& options, std::mt19937_64& rng);

// Draws the three losses in a fixed order from an RNG seeded by (seed, step).
Losses compute_losses(const Model& model, ad::Tape& tape, BatchRun& batch, const ObjectiveOptions& options,
                      std::uint64_t seed, std::uint64_t step);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t step);

}  // namespace ni
