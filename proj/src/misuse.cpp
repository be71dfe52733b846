#include "ni/misuse.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "ni/errors.hpp"

namespace ni {

namespace {

int argmax_column(const Matrix& m, int begin, int count) {
  int best = 0;
  for (int i = 1; i < count; ++i) {
    if (m(begin + i, 0) > m(begin + best, 0)) best = i;
  }
  return best;
}

ad::Var mean_of(std::vector<ad::Var>& parts) {
  return ad::scale(ad::add_scalars(parts), 1.0 / static_cast<double>(parts.size()));
}

// Re-executes `record` once per snapshot binding with argument `arg` replaced.
struct CandidateSet {
  int script = -1;
  int record = -1;
  int arg = -1;
  int first = 0;  // row in the collated result
  int count = 0;
};

void add_candidates(MisuseBatch& batch, int script, int record, int arg, std::vector<ExecRequest>& requests,
                    std::vector<CandidateSet>& sets) {
  Interpreter& in = *batch.run.scripts[static_cast<std::size_t>(script)].interp;
  const LambdaRecord& rec = in.records()[static_cast<std::size_t>(record)];
  const Snapshot& snap = in.snapshots().at(static_cast<std::size_t>(rec.snapshot));
  CandidateSet set{script, record, arg, static_cast<int>(requests.size()), static_cast<int>(snap.bindings.size())};
  for (const auto& [name, obj] : snap.bindings) requests.push_back(in.request_for(rec, std::make_pair(arg, obj)));
  sets.push_back(set);
}

ad::Var pi_scores(const Model& model, ad::Tape& tape, std::vector<ExecRequest>& requests) {
  if (requests.empty()) return {};
  std::vector<ExecResult> results = model.execute(tape, requests);
  std::vector<ad::Var> rets;
  rets.reserve(results.size());
  for (ExecResult& r : results) rets.push_back(r.ret);
  return model.misuse().pi(tape, ad::concat_rows(rets));
}

std::string name_of(const Interpreter& in, const Snapshot& snap, int object) {
  int target = object;
  if (in.object(object).view_of >= 0) target = in.object(object).view_of;
  for (const auto& [name, obj] : snap.visible) {
    if (obj == target) return name;
  }
  return "<expr>";
}

}  // namespace

MisuseBatch run_misuse_batch(const Model& model, ad::Tape& tape, std::span<const Script* const> scripts,
                             const MisuseOptions& options) {
  MisuseBatch batch;
  std::vector<BatchItem> items;
  for (const Script* s : scripts) {
    MisuseLabel label = s->label.value_or(MisuseLabel{});
    items.push_back(BatchItem{&s->code, label.has_misuse ? label.byte_offset : -1});
    batch.labels.push_back(label);
    batch.ids.push_back(s->id);
  }
  BatchOptions bo = options.batch;
  bo.snapshots = true;
  batch.run = run_batch(model, tape, items, bo);
  batch.truth.resize(scripts.size());
  batch.usable.assign(scripts.size(), 0);
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    const ScriptRun& run = batch.run.scripts[i];
    if (!run.usable()) {
      ++batch.skipped;
      batch.truth[i].error = run.status == RunStatus::NotStarted ? "not started" : run.error;
      continue;
    }
    batch.truth[i] = ground_run(*run.interp, batch.labels[i]);
    if (batch.truth[i].ok()) {
      batch.usable[i] = 1;
    } else {
      ++batch.skipped;
    }
  }
  return batch;
}

HeadOutputs misuse_heads(const Model& model, ad::Tape& tape, MisuseBatch& batch, int max_returns, bool with_eta) {
  HeadOutputs out;
  const MisuseHeads& h = model.misuse();
  const int cap = std::min(max_returns, model.config().head_max_len);
  std::vector<ad::Var> k_rows, r_rows;
  std::vector<int> k_pos, r_pos;
  ad::Segments ks{{0}}, rs{{0}};
  ad::Var cls = tape.param(*h.kappa_cls);
  for (std::size_t i = 0; i < batch.usable.size(); ++i) {
    if (!batch.usable[i]) continue;
    Interpreter& in = *batch.run.scripts[i].interp;
    const int L = std::min(cap, static_cast<int>(in.records().size()));
    out.scripts.push_back(static_cast<int>(i));
    out.lengths.push_back(L);
    out.offsets.push_back(static_cast<int>(r_rows.size()));
    k_rows.push_back(cls);
    k_pos.push_back(0);
    for (int k = 0; k < L; ++k) {
      ad::Var r = in.executed_or_guessed(in.records()[static_cast<std::size_t>(k)].result);
      k_rows.push_back(r);
      k_pos.push_back(k + 1);
      r_rows.push_back(r);
      r_pos.push_back(k);
    }
    ks.starts.push_back(static_cast<int>(k_rows.size()));
    rs.starts.push_back(static_cast<int>(r_rows.size()));
  }
  if (out.scripts.empty()) return out;

  ad::Var kx = ad::add(ad::concat_rows(k_rows), ad::gather_rows(tape.param(*h.kappa_pos), k_pos));
  ad::Var kh = h.kappa_ln(tape, h.kappa(tape, kx, ks));
  std::vector<int> cls_rows(ks.starts.begin(), ks.starts.end() - 1);
  out.kappa = h.kappa_out(tape, ad::gather_rows(kh, cls_rows));

  ad::Var returns = ad::concat_rows(r_rows);
  ad::Var px = ad::add(returns, ad::gather_rows(tape.param(*h.psi_pos), r_pos));
  out.psi = h.psi_out(tape, h.psi_ln(tape, h.psi(tape, px, rs)));
  if (with_eta) {
    ad::Var ex = ad::add(returns, ad::gather_rows(tape.param(*h.eta_pos), r_pos));
    out.eta = h.eta_out(tape, h.eta_ln(tape, h.eta(tape, ex, rs)));
  }
  return out;
}

MisuseLosses misuse_losses(const Model& model, ad::Tape& tape, MisuseBatch& batch, const MisuseOptions& options) {
  MisuseLosses out;
  HeadOutputs heads = misuse_heads(model, tape, batch, options.max_returns, true);
  const int n = static_cast<int>(heads.scripts.size());
  if (n == 0) return out;

  // L1: every usable script.
  std::vector<double> labels;
  for (int s : heads.scripts) labels.push_back(batch.labels[static_cast<std::size_t>(s)].has_misuse ? 1.0 : 0.0);
  out.l1.loss = ad::scale(ad::bce_rows(heads.kappa, labels), 1.0 / n);
  out.l1.samples = n;
  out.l1.terms = n;
  for (int i = 0; i < n; ++i) {
    if ((heads.kappa.value()(i, 0) >= 0.0) == (labels[static_cast<std::size_t>(i)] >= 0.5)) ++out.l1.correct;
  }

  std::vector<int> eta_rows;
  std::vector<double> eta_labels;
  std::vector<ad::Var> l3_parts, l4_parts, l5_parts;
  std::vector<ExecRequest> requests;
  std::vector<CandidateSet> sets;
  std::vector<int> set_targets;
  for (int i = 0; i < n; ++i) {
    const std::size_t s = static_cast<std::size_t>(heads.scripts[static_cast<std::size_t>(i)]);
    if (!batch.labels[s].has_misuse) continue;
    const GroundedLabel& g = batch.truth[s];
    Interpreter& in = *batch.run.scripts[s].interp;
    const int L = heads.lengths[static_cast<std::size_t>(i)];
    const int off = heads.offsets[static_cast<std::size_t>(i)];
    ++out.l2.samples;
    for (int k = 0; k < L; ++k) {
      eta_rows.push_back(off + k);
      eta_labels.push_back(in.object(in.records()[static_cast<std::size_t>(k)].result).contaminated ? 1.0 : 0.0);
    }

    if (g.source_record < L) {
      ad::Var logits = ad::reshape(ad::slice_rows(heads.psi, off, L), 1, L);
      const int target = g.source_record;
      l3_parts.push_back(ad::cross_entropy_rows(logits, std::span<const int>(&target, 1)));
      ++out.l3.samples;
      ++out.l3.terms;
      if (argmax_column(heads.psi.value(), off, L) == target) ++out.l3.correct;
    }

    const LambdaRecord& rec = in.records()[static_cast<std::size_t>(g.source_record)];
    if (rec.arg_outputs.valid()) {
      const int N = rec.arg_outputs.rows();
      ad::Var tau = model.misuse().tau(tape, rec.arg_outputs);
      const int target = g.arg_index;
      l4_parts.push_back(ad::cross_entropy_rows(ad::reshape(tau, 1, N), std::span<const int>(&target, 1)));
      ++out.l4.samples;
      ++out.l4.terms;
      if (argmax_column(tau.value(), 0, N) == target) ++out.l4.correct;
    }

    add_candidates(batch, static_cast<int>(s), g.source_record, g.arg_index, requests, sets);
    set_targets.push_back(g.correct_candidate);
  }

  if (!eta_rows.empty()) {
    ad::Var logits = ad::gather_rows(heads.eta, eta_rows);
    out.l2.loss = ad::scale(ad::bce_rows(logits, eta_labels), 1.0 / static_cast<double>(eta_rows.size()));
    out.l2.terms = static_cast<int>(eta_rows.size());
    for (std::size_t k = 0; k < eta_rows.size(); ++k) {
      if ((logits.value()(static_cast<int>(k), 0) >= 0.0) == (eta_labels[k] >= 0.5)) ++out.l2.correct;
    }
  }
  if (!l3_parts.empty()) out.l3.loss = mean_of(l3_parts);
  if (!l4_parts.empty()) out.l4.loss = mean_of(l4_parts);

  ad::Var pi = pi_scores(model, tape, requests);
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const CandidateSet& c = sets[k];
    const int target = set_targets[k];
    ad::Var logits = ad::reshape(ad::slice_rows(pi, c.first, c.count), 1, c.count);
    l5_parts.push_back(ad::cross_entropy_rows(logits, std::span<const int>(&target, 1)));
    ++out.l5.samples;
    ++out.l5.terms;
    if (argmax_column(pi.value(), c.first, c.count) == target) ++out.l5.correct;
  }
  if (!l5_parts.empty()) out.l5.loss = mean_of(l5_parts);

  std::vector<ad::Var> parts;
  for (const LossTerm* t : {&out.l1, &out.l2, &out.l3, &out.l4, &out.l5}) {
    if (t->loss.valid()) parts.push_back(t->loss);
  }
  out.total = ad::add_scalars(parts);
  return out;
}

MisuseScores misuse_infer(const Model& model, ad::Tape& tape, MisuseBatch& batch, const MisuseOptions& options,
                          std::vector<MisusePrediction>* predictions) {
  MisuseScores scores;
  scores.skipped = batch.skipped;
  HeadOutputs heads = misuse_heads(model, tape, batch, options.max_returns, false);
  const int n = static_cast<int>(heads.scripts.size());

  struct Chain {
    int script;
    int call = -1;
    int arg = -1;
    int set = -1;  // unforced candidate set
  };
  std::vector<Chain> chains;
  std::vector<ExecRequest> requests;
  std::vector<CandidateSet> sets;
  std::vector<int> forced_sets(static_cast<std::size_t>(n), -1);

  for (int i = 0; i < n; ++i) {
    const std::size_t s = static_cast<std::size_t>(heads.scripts[static_cast<std::size_t>(i)]);
    Interpreter& in = *batch.run.scripts[s].interp;
    const double logit = heads.kappa.value()(i, 0);
    scores.p_misuse.push_back(1.0 / (1.0 + std::exp(-logit)));
    scores.label.push_back(batch.labels[s].has_misuse ? 1 : 0);

    const int L = heads.lengths[static_cast<std::size_t>(i)];
    const int off = heads.offsets[static_cast<std::size_t>(i)];
    Chain chain{static_cast<int>(s)};
    chain.call = argmax_column(heads.psi.value(), off, L);
    const LambdaRecord& rec = in.records()[static_cast<std::size_t>(chain.call)];
    if (rec.arg_outputs.valid()) {
      ad::Var tau = model.misuse().tau(tape, rec.arg_outputs);
      chain.arg = argmax_column(tau.value(), 0, rec.arg_outputs.rows());
      chain.set = static_cast<int>(sets.size());
      add_candidates(batch, chain.script, chain.call, chain.arg, requests, sets);
    }
    chains.push_back(chain);

    if (!batch.labels[s].has_misuse) continue;
    const GroundedLabel& g = batch.truth[s];
    ++scores.misuse_scripts;
    if (chain.call == g.source_record) ++scores.call_correct;
    const LambdaRecord& src = in.records()[static_cast<std::size_t>(g.source_record)];
    ad::Var tau = model.misuse().tau(tape, src.arg_outputs);
    if (argmax_column(tau.value(), 0, src.arg_outputs.rows()) == g.arg_index) ++scores.arg_correct;
    const Snapshot& snap = in.snapshots().at(static_cast<std::size_t>(src.snapshot));
    scores.repair_chance_sum += 1.0 / static_cast<double>(snap.bindings.size());
    forced_sets[static_cast<std::size_t>(i)] = static_cast<int>(sets.size());
    add_candidates(batch, chain.script, g.source_record, g.arg_index, requests, sets);
  }

  ad::Var pi = pi_scores(model, tape, requests);
  for (int i = 0; i < n; ++i) {
    const Chain& chain = chains[static_cast<std::size_t>(i)];
    const std::size_t s = static_cast<std::size_t>(chain.script);
    Interpreter& in = *batch.run.scripts[s].interp;
    const GroundedLabel& g = batch.truth[s];
    const bool misuse = batch.labels[s].has_misuse;

    if (forced_sets[static_cast<std::size_t>(i)] >= 0) {
      const CandidateSet& c = sets[static_cast<std::size_t>(forced_sets[static_cast<std::size_t>(i)])];
      if (argmax_column(pi.value(), c.first, c.count) == g.correct_candidate) ++scores.repair_correct;
    }

    MisusePrediction p;
    p.script_id = batch.ids[s];
    p.p_misuse = scores.p_misuse[static_cast<std::size_t>(i)];
    p.call_record = chain.call;
    p.arg_index = chain.arg;
    const LambdaRecord& rec = in.records()[static_cast<std::size_t>(chain.call)];
    const Snapshot& snap = in.snapshots().at(static_cast<std::size_t>(rec.snapshot));
    int chosen = -1;
    if (chain.set >= 0 && sets[static_cast<std::size_t>(chain.set)].count > 0) {
      const CandidateSet& c = sets[static_cast<std::size_t>(chain.set)];
      const int k = argmax_column(pi.value(), c.first, c.count);
      chosen = snap.bindings[static_cast<std::size_t>(k)].second;
      p.repair_name = snap.bindings[static_cast<std::size_t>(k)].first;
    }
    if (misuse && chain.call == g.source_record && chain.arg == g.arg_index && chosen == g.correct_object) {
      ++scores.joint_correct;
    }
    if (predictions) {
      const SyntaxTree& tree = *batch.run.scripts[s].tree;
      const int line = tree.line_of(tree.node(rec.node_id).span.begin);
      const std::string call = "call #" + std::to_string(rec.id) + " " + rec.callee.name + " (line " +
                               std::to_string(line) + ")";
      std::string path;
      if (chain.arg >= 0) {
        path = "identifier '" + name_of(in, snap, rec.args[static_cast<std::size_t>(chain.arg)]) + "' -> " + call +
               " -> argument " + std::to_string(chain.arg) +
               (p.repair_name.empty() ? " -> no candidate in scope" : " -> substitute '" + p.repair_name + "'");
      } else {
        path = call + " -> no arguments";
      }
      p.explanation_path = std::move(path);
      predictions->push_back(std::move(p));
    }
  }
  return scores;
}

void MisuseScores::merge(const MisuseScores& o) {
  p_misuse.insert(p_misuse.end(), o.p_misuse.begin(), o.p_misuse.end());
  label.insert(label.end(), o.label.begin(), o.label.end());
  call_correct += o.call_correct;
  arg_correct += o.arg_correct;
  repair_correct += o.repair_correct;
  joint_correct += o.joint_correct;
  misuse_scripts += o.misuse_scripts;
  repair_chance_sum += o.repair_chance_sum;
  skipped += o.skipped;
}

double MisuseScores::auc() const { return roc_auc(p_misuse, label); }

double MisuseScores::classification_accuracy() const {
  if (p_misuse.empty()) return 0.0;
  long ok = 0;
  for (std::size_t i = 0; i < p_misuse.size(); ++i) ok += ((p_misuse[i] >= 0.5) == (label[i] != 0)) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(p_misuse.size());
}

namespace {
double ratio(long a, long b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; }
}  // namespace

double MisuseScores::call_accuracy() const { return ratio(call_correct, misuse_scripts); }
double MisuseScores::arg_accuracy() const { return ratio(arg_correct, misuse_scripts); }
double MisuseScores::repair_accuracy() const { return ratio(repair_correct, misuse_scripts); }
double MisuseScores::joint_accuracy() const { return ratio(joint_correct, misuse_scripts); }
double MisuseScores::repair_chance() const {
  return misuse_scripts ? repair_chance_sum / static_cast<double>(misuse_scripts) : 0.0;
}

double roc_auc(std::span<const double> scores, std::span<const char> labels) {
  if (scores.size() != labels.size()) throw InternalFault("roc_auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        pos += 1.0;
        rank_sum += avg_rank;
      } else {
        neg += 1.0;
      }
    }
    i = j;
  }
  if (pos == 0.0 || neg == 0.0) return 0.5;
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

std::string to_json(const MisusePrediction& p) {
  nlohmann::json j;
  j["script_id"] = p.script_id;
  j["p_misuse"] = p.p_misuse;
  j["call_record"] = p.call_record;
  j["arg_index"] = p.arg_index;
  j["repair_name"] = p.repair_name;
  j["explanation_path"] = p.explanation_path;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace ni
