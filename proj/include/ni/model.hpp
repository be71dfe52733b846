#pragma once

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ni/ast.hpp"
#include "ni/autodiff.hpp"
#include "ni/builtins.hpp"
#include "ni/nn.hpp"
#include "ni/params.hpp"
#include "ni/tokenizer.hpp"

namespace ni {

struct ModelConfig {
  int hidden = 64;
  int encoder_layers = 2;
  int encoder_heads = 4;
  int executor_layers = 2;
  int executor_heads = 4;
  int max_tokens = 512;
  int max_args = 16;
  int head_max_len = 256;
  std::uint64_t seed = 1;
};

// Token encodings of one script inside a (possibly multi-script) encoder
// forward pass. Rows [offset, offset + tokens.size()) of `rows` belong to it.
struct Encoded {
  ad::Var rows;
  int offset = 0;
  std::vector<Token> tokens;

  // Row indices (absolute) of tokens whose span lies inside `donor`.
  std::vector<int> rows_within(Span donor) const;
};

struct ExecRequest {
  ad::Var theta;
  std::vector<ad::Var> contexts;  // outermost first
  std::vector<ad::Var> guessed;   // one per argument
  std::vector<ad::Var> executed;  // one per argument; equal to guessed when never executed
};

struct ExecResult {
  ad::Var ret;
  ad::Var arg_outputs;  // N x H, invalid when N == 0
};

// Misuse heads: three single-layer encoders over call-return sequences and
// two linear scorers.
struct MisuseHeads {
  ad::Parameter* kappa_cls = nullptr;
  ad::Parameter* kappa_pos = nullptr;
  nn::EncoderLayer kappa;
  nn::LayerNorm kappa_ln;
  nn::Linear kappa_out;
  ad::Parameter* eta_pos = nullptr;
  nn::EncoderLayer eta;
  nn::LayerNorm eta_ln;
  nn::Linear eta_out;
  ad::Parameter* psi_pos = nullptr;
  nn::EncoderLayer psi;
  nn::LayerNorm psi_ln;
  nn::Linear psi_out;
  nn::Linear tau;
  nn::Linear pi;
};

class Model {
 public:
  Model(ModelConfig cfg, Vocabulary vocab);

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  int hidden() const { return cfg_.hidden; }

  // ---- guesser ----
  std::vector<Token> tokens_for(const std::string& source) const;
  // One encoder pass over several scripts (ragged batch).
  std::vector<Encoded> encode(ad::Tape& tape, std::span<const std::string* const> sources) const;
  Encoded encode_one(ad::Tape& tape, const std::string& source) const;
  // Max-pool over the tokens inside `donor` plus the type embedding of `kind`.
  // Falls back to the default value (or default function) row when no token
  // lies in the donor span.
  ad::Var pool(ad::Tape& tape, const Encoded& enc, Span donor, NodeKind kind, bool function_default) const;

  // ---- builtins and constants ----
  ad::Var builtin(ad::Tape& tape, int index) const;
  ad::Var unpack_index(ad::Tape& tape, int i) const;

  // ---- executor ----
  std::vector<ExecResult> execute(ad::Tape& tape, std::span<const ExecRequest> batch) const;

  // ---- objective heads ----
  const nn::Mlp& alpha() const { return alpha_; }
  const nn::Mlp& beta() const { return beta_; }
  const nn::Mlp& phi() const { return phi_; }
  const MisuseHeads& misuse() const { return misuse_; }

 private:
  ModelConfig cfg_;
  Vocabulary vocab_;
  ParameterStore store_;

  ad::Parameter* tok_emb_ = nullptr;
  ad::Parameter* tok_pos_ = nullptr;
  ad::Parameter* type_emb_ = nullptr;
  nn::Encoder guesser_;
  ad::Parameter* builtins_ = nullptr;

  ad::Parameter* exec_role_ = nullptr;
  ad::Parameter* exec_pos_ = nullptr;
  ad::Parameter* unpack_index_ = nullptr;
  nn::Linear arg_proj_;
  nn::Encoder executor_;

  nn::Mlp alpha_;
  nn::Mlp beta_;
  nn::Mlp phi_;
  MisuseHeads misuse_;
};

// Positions in the executor sequence: contexts 0..15 (deeper ones clamp),
// arguments 16..31, the signature 32.
inline constexpr int kExecContextSlots = 16;
inline constexpr int kExecPositionRows = 33;

}  // namespace ni
