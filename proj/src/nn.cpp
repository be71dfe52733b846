#include "ni/nn.hpp"

#include <cmath>

namespace ni::nn {

Linear Linear::create(ParameterStore& store, const std::string& name, int in, int out, std::mt19937_64& rng) {
  Linear l;
  l.w = &store.create(name + ".w", in, out, Init::Uniform, rng, 1.0 / std::sqrt(static_cast<double>(in)));
  l.b = &store.create(name + ".b", 1, out, Init::Zeros, rng, 0.0, false);
  return l;
}

ad::Var Linear::operator()(ad::Tape& tape, const ad::Var& x) const {
  return ad::linear(x, tape.param(*w), tape.param(*b));
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, int width, std::mt19937_64& rng) {
  LayerNorm n;
  n.gamma = &store.create(name + ".gamma", 1, width, Init::Ones, rng, 0.0, false);
  n.beta = &store.create(name + ".beta", 1, width, Init::Zeros, rng, 0.0, false);
  return n;
}

ad::Var LayerNorm::operator()(ad::Tape& tape, const ad::Var& x) const {
  return ad::layer_norm(x, tape.param(*gamma), tape.param(*beta));
}

Mlp Mlp::create(ParameterStore& store, const std::string& name, int in_width, int hidden, int out_width,
                std::mt19937_64& rng) {
  return Mlp{Linear::create(store, name + ".in", in_width, hidden, rng),
             Linear::create(store, name + ".out", hidden, out_width, rng)};
}

ad::Var Mlp::operator()(ad::Tape& tape, const ad::Var& x) const { return out(tape, ad::gelu(in(tape, x))); }

EncoderLayer EncoderLayer::create(ParameterStore& store, const std::string& name, int width, int heads,
                                  std::mt19937_64& rng) {
  EncoderLayer l;
  l.ln_attn = LayerNorm::create(store, name + ".ln_attn", width, rng);
  l.q = Linear::create(store, name + ".q", width, width, rng);
  l.k = Linear::create(store, name + ".k", width, width, rng);
  l.v = Linear::create(store, name + ".v", width, width, rng);
  l.o = Linear::create(store, name + ".o", width, width, rng);
  l.ln_ffn = LayerNorm::create(store, name + ".ln_ffn", width, rng);
  l.ffn = Mlp::create(store, name + ".ffn", width, 4 * width, width, rng);
  l.heads = heads;
  return l;
}

ad::Var EncoderLayer::operator()(ad::Tape& tape, const ad::Var& x, const ad::Segments& segments,
                                 const std::vector<std::uint8_t>* key_mask) const {
  const ad::Var h = ln_attn(tape, x);
  const ad::Var att = ad::attention(q(tape, h), k(tape, h), v(tape, h), segments, heads, key_mask);
  const ad::Var x1 = ad::add(x, o(tape, att));
  return ad::add(x1, ffn(tape, ln_ffn(tape, x1)));
}

Encoder Encoder::create(ParameterStore& store, const std::string& name, int width, int layers, int heads,
                        std::mt19937_64& rng) {
  Encoder e;
  for (int i = 0; i < layers; ++i) {
    e.layers.push_back(EncoderLayer::create(store, name + ".layer" + std::to_string(i), width, heads, rng));
  }
  e.final_ln = LayerNorm::create(store, name + ".ln_final", width, rng);
  return e;
}

ad::Var Encoder::operator()(ad::Tape& tape, const ad::Var& x, const ad::Segments& segments,
                            const std::vector<std::uint8_t>* key_mask) const {
  ad::Var h = x;
  for (const EncoderLayer& layer : layers) h = layer(tape, h, segments, key_mask);
  return final_ln(tape, h);
}

}  // namespace ni::nn
