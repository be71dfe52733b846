#include "ni/model.hpp"

#include <algorithm>

#include "ni/errors.hpp"

namespace ni {

std::vector<int> Encoded::rows_within(Span donor) const {
  std::vector<int> out;
  auto it = std::lower_bound(tokens.begin(), tokens.end(), donor.begin,
                             [](const Token& t, std::size_t b) { return t.span.begin < b; });
  for (; it != tokens.end() && it->span.begin < donor.end; ++it) {
    if (it->span.end <= donor.end) out.push_back(offset + static_cast<int>(it - tokens.begin()));
  }
  return out;
}

namespace {

MisuseHeads make_misuse_heads(ParameterStore& s, const ModelConfig& c, std::mt19937_64& rng) {
  MisuseHeads h;
  const int H = c.hidden;
  h.kappa_cls = &s.create("misuse.kappa.cls", 1, H, Init::Normal, rng, 0.1);
  h.kappa_pos = &s.create("misuse.kappa.pos", c.head_max_len + 1, H, Init::Normal, rng, 0.1);
  h.kappa = nn::EncoderLayer::create(s, "misuse.kappa.layer", H, c.encoder_heads, rng);
  h.kappa_ln = nn::LayerNorm::create(s, "misuse.kappa.ln", H, rng);
  h.kappa_out = nn::Linear::create(s, "misuse.kappa.out", H, 1, rng);
  h.eta_pos = &s.create("misuse.eta.pos", c.head_max_len, H, Init::Normal, rng, 0.1);
  h.eta = nn::EncoderLayer::create(s, "misuse.eta.layer", H, c.encoder_heads, rng);
  h.eta_ln = nn::LayerNorm::create(s, "misuse.eta.ln", H, rng);
  h.eta_out = nn::Linear::create(s, "misuse.eta.out", H, 1, rng);
  h.psi_pos = &s.create("misuse.psi.pos", c.head_max_len, H, Init::Normal, rng, 0.1);
  h.psi = nn::EncoderLayer::create(s, "misuse.psi.layer", H, c.encoder_heads, rng);
  h.psi_ln = nn::LayerNorm::create(s, "misuse.psi.ln", H, rng);
  h.psi_out = nn::Linear::create(s, "misuse.psi.out", H, 1, rng);
  h.tau = nn::Linear::create(s, "misuse.tau", H, 1, rng);
  h.pi = nn::Linear::create(s, "misuse.pi", H, 1, rng);
  return h;
}

}  // namespace

Model::Model(ModelConfig cfg, Vocabulary vocab) : cfg_(cfg), vocab_(std::move(vocab)) {
  if (cfg_.hidden <= 0 || cfg_.encoder_heads <= 0 || cfg_.executor_heads <= 0 ||
      cfg_.hidden % cfg_.encoder_heads != 0 || cfg_.hidden % cfg_.executor_heads != 0) {
    throw ConfigError("hidden width must be positive and divisible by the head counts");
  }
  if (cfg_.max_tokens <= 0 || cfg_.max_args <= 0 || cfg_.encoder_layers <= 0 || cfg_.executor_layers <= 0) {
    throw ConfigError("model sizes must be positive");
  }
  std::mt19937_64 rng(cfg_.seed);
  const int H = cfg_.hidden;
  tok_emb_ = &store_.create("guesser.token_embedding", vocab_.rows(), H, Init::Normal, rng, 0.1);
  tok_pos_ = &store_.create("guesser.position_embedding", cfg_.max_tokens, H, Init::Normal, rng, 0.1);
  guesser_ = nn::Encoder::create(store_, "guesser.encoder", H, cfg_.encoder_layers, cfg_.encoder_heads, rng);
  type_emb_ = &store_.create("guesser.type_embedding", kNodeKindCount, H, Init::Normal, rng, 0.1);
  builtins_ = &store_.create("builtins.embedding", static_cast<int>(builtin_table().size()), H, Init::Normal, rng, 0.1);
  exec_role_ = &store_.create("executor.role_embedding", 3, H, Init::Normal, rng, 0.1);
  exec_pos_ = &store_.create("executor.position_embedding", kExecPositionRows, H, Init::Normal, rng, 0.1);
  unpack_index_ = &store_.create("executor.unpack_index", std::max(cfg_.max_args, 16), H, Init::Normal, rng, 0.1);
  arg_proj_ = nn::Linear::create(store_, "executor.arg_projection", 2 * H, H, rng);
  executor_ = nn::Encoder::create(store_, "executor.encoder", H, cfg_.executor_layers, cfg_.executor_heads, rng);
  alpha_ = nn::Mlp::create(store_, "objective.alpha", 2 * H, H, 1, rng);
  beta_ = nn::Mlp::create(store_, "objective.beta", H, H, 1, rng);
  phi_ = nn::Mlp::create(store_, "objective.phi", 2 * H, H, 1, rng);
  misuse_ = make_misuse_heads(store_, cfg_, rng);
}

std::vector<Token> Model::tokens_for(const std::string& source) const {
  std::vector<Token> toks = tokenize(source);
  if (static_cast<int>(toks.size()) > cfg_.max_tokens) toks.resize(static_cast<std::size_t>(cfg_.max_tokens));
  return toks;
}

std::vector<Encoded> Model::encode(ad::Tape& tape, std::span<const std::string* const> sources) const {
  std::vector<Encoded> out(sources.size());
  std::vector<int> ids, positions;
  ad::Segments segments;
  segments.starts.push_back(0);
  for (std::size_t s = 0; s < sources.size(); ++s) {
    out[s].tokens = tokens_for(*sources[s]);
    out[s].offset = static_cast<int>(ids.size());
    for (std::size_t i = 0; i < out[s].tokens.size(); ++i) {
      ids.push_back(vocab_.id(out[s].tokens[i].text));
      positions.push_back(static_cast<int>(i));
    }
    segments.starts.push_back(static_cast<int>(ids.size()));
  }
  if (ids.empty()) return out;
  ad::Var x = ad::add(ad::gather_rows(tape.param(*tok_emb_), ids), ad::gather_rows(tape.param(*tok_pos_), positions));
  ad::Var rows = guesser_(tape, x, segments);
  for (Encoded& e : out) e.rows = rows;
  return out;
}

Encoded Model::encode_one(ad::Tape& tape, const std::string& source) const {
  const std::string* p = &source;
  return std::move(encode(tape, std::span<const std::string* const>(&p, 1)).front());
}

ad::Var Model::pool(ad::Tape& tape, const Encoded& enc, Span donor, NodeKind kind, bool function_default) const {
  std::vector<int> rows;
  if (enc.rows.valid()) rows = enc.rows_within(donor);
  ad::Var base;
  if (rows.empty()) {
    base = builtin(tape, builtin_table().index(function_default ? "fun_obj_val_default" : "val_obj_val_default"));
  } else {
    base = ad::max_pool_rows(enc.rows, rows);
  }
  const int k = static_cast<int>(kind);
  return ad::add(base, ad::gather_rows(tape.param(*type_emb_), std::span<const int>(&k, 1)));
}

ad::Var Model::builtin(ad::Tape& tape, int index) const {
  return ad::gather_rows(tape.param(*builtins_), std::span<const int>(&index, 1));
}

ad::Var Model::unpack_index(ad::Tape& tape, int i) const {
  const int row = std::min(i, unpack_index_->value.rows() - 1);
  return ad::gather_rows(tape.param(*unpack_index_), std::span<const int>(&row, 1));
}

std::vector<ExecResult> Model::execute(ad::Tape& tape, std::span<const ExecRequest> batch) const {
  std::vector<ExecResult> results(batch.size());
  if (batch.empty()) return results;
  const int H = cfg_.hidden;
  std::vector<ad::Var> head_rows;
  std::vector<ad::Var> guessed, executed;
  struct Layout {
    int theta = 0;
    int ctx_begin = 0;
    int arg_begin = 0;
    int contexts = 0;
    int args = 0;
  };
  std::vector<Layout> layout(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const ExecRequest& req = batch[r];
    if (req.guessed.size() != req.executed.size()) throw InternalFault("executor: argument pair mismatch");
    if (static_cast<int>(req.guessed.size()) > cfg_.max_args) throw InternalFault("executor: too many arguments");
    if (!req.theta.valid() || req.theta.rows() != 1 || req.theta.cols() != H) {
      throw InternalFault("executor: signature must be 1 x H");
    }
    layout[r].theta = static_cast<int>(head_rows.size());
    head_rows.push_back(req.theta);
    layout[r].ctx_begin = static_cast<int>(head_rows.size());
    layout[r].contexts = static_cast<int>(req.contexts.size());
    for (const ad::Var& c : req.contexts) head_rows.push_back(c);
    layout[r].arg_begin = static_cast<int>(guessed.size());
    layout[r].args = static_cast<int>(req.guessed.size());
    for (std::size_t j = 0; j < req.guessed.size(); ++j) {
      guessed.push_back(req.guessed[j]);
      executed.push_back(req.executed[j]);
    }
  }
  std::vector<ad::Var> pieces = head_rows;
  const int head_count = static_cast<int>(head_rows.size());
  if (!guessed.empty()) {
    ad::Var pairs = ad::concat_cols(ad::concat_rows(guessed), ad::concat_rows(executed));
    pieces.push_back(arg_proj_(tape, pairs));
  }
  ad::Var full = ad::concat_rows(pieces);

  std::vector<int> perm, roles, positions;
  ad::Segments segments;
  segments.starts.push_back(0);
  for (const Layout& l : layout) {
    perm.push_back(l.theta);
    roles.push_back(0);
    positions.push_back(kExecPositionRows - 1);
    for (int i = 0; i < l.contexts; ++i) {
      perm.push_back(l.ctx_begin + i);
      roles.push_back(1);
      positions.push_back(std::min(i, kExecContextSlots - 1));
    }
    for (int j = 0; j < l.args; ++j) {
      perm.push_back(head_count + l.arg_begin + j);
      roles.push_back(2);
      positions.push_back(std::min(kExecContextSlots + j, kExecPositionRows - 2));
    }
    segments.starts.push_back(static_cast<int>(perm.size()));
  }
  ad::Var x = ad::add(ad::gather_rows(full, perm),
                      ad::add(ad::gather_rows(tape.param(*exec_role_), roles),
                              ad::gather_rows(tape.param(*exec_pos_), positions)));
  ad::Var out = executor_(tape, x, segments);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const int start = segments.starts[r];
    results[r].ret = ad::slice_rows(out, start, 1);
    if (layout[r].args > 0) results[r].arg_outputs = ad::slice_rows(out, start + 1 + layout[r].contexts, layout[r].args);
  }
  return results;
}

}  // namespace ni
