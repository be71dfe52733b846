#pragma once

#include <random>
#include <string>
#include <vector>

#include "ni/autodiff.hpp"
#include "ni/params.hpp"

namespace ni::nn {

struct Linear {
  ad::Parameter* w = nullptr;
  ad::Parameter* b = nullptr;

  static Linear create(ParameterStore& store, const std::string& name, int in, int out, std::mt19937_64& rng);
  ad::Var operator()(ad::Tape& tape, const ad::Var& x) const;
};

struct LayerNorm {
  ad::Parameter* gamma = nullptr;
  ad::Parameter* beta = nullptr;

  static LayerNorm create(ParameterStore& store, const std::string& name, int width, std::mt19937_64& rng);
  ad::Var operator()(ad::Tape& tape, const ad::Var& x) const;
};

// Two linear maps with a GELU in between.
struct Mlp {
  Linear in;
  Linear out;

  static Mlp create(ParameterStore& store, const std::string& name, int in_width, int hidden, int out_width,
                    std::mt19937_64& rng);
  ad::Var operator()(ad::Tape& tape, const ad::Var& x) const;
};

// Pre-norm transformer layer: x + attn(ln(x)), then x + ffn(ln(x)).
struct EncoderLayer {
  LayerNorm ln_attn;
  Linear q, k, v, o;
  LayerNorm ln_ffn;
  Mlp ffn;
  int heads = 1;

  static EncoderLayer create(ParameterStore& store, const std::string& name, int width, int heads,
                             std::mt19937_64& rng);
  ad::Var operator()(ad::Tape& tape, const ad::Var& x, const ad::Segments& segments,
                     const std::vector<std::uint8_t>* key_mask = nullptr) const;
};

struct Encoder {
  std::vector<EncoderLayer> layers;
  LayerNorm final_ln;

  static Encoder create(ParameterStore& store, const std::string& name, int width, int layers, int heads,
                        std::mt19937_64& rng);
  ad::Var operator()(ad::Tape& tape, const ad::Var& x, const ad::Segments& segments,
                     const std::vector<std::uint8_t>* key_mask = nullptr) const;
};

}  // namespace ni::nn
