#include "ni/objectives.hpp"

#include <algorithm>
#include <map>

#include "ni/dfg.hpp"
#include "ni/errors.hpp"

namespace ni {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t step) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + step + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

int uniform(std::mt19937_64& rng, int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }

// First `k` entries of a Fisher-Yates shuffle of [0, n).
std::vector<int> sample_indices(std::mt19937_64& rng, int n, int k) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  k = std::min(k, n);
  for (int i = 0; i < k; ++i) std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(i + uniform(rng, n - i))]);
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

int argmax_row(const Matrix& m, int row) {
  int best = 0;
  for (int j = 1; j < m.cols(); ++j) {
    if (m(row, j) > m(row, best)) best = j;
  }
  return best;
}

LossTerm binary_term(const nn::Mlp& head, ad::Tape& tape, std::vector<ad::Var> rows,
                     const std::vector<double>& labels, int samples) {
  LossTerm term;
  term.samples = samples;
  term.terms = static_cast<int>(labels.size());
  ad::Var logits = head(tape, ad::concat_rows(rows));
  term.loss = ad::scale(ad::bce_rows(logits, labels), 1.0 / static_cast<double>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = logits.value()[i] >= 0.0;
    if (predicted == (labels[i] >= 0.5)) ++term.correct;
  }
  return term;
}

}  // namespace

LossTerm loss_return_variable(const Model& model, ad::Tape& tape, BatchRun& batch, const ObjectiveOptions& options,
                              std::mt19937_64& rng) {
  struct Entry {
    int script;
    int node;
    int object;
    std::string name;
  };
  std::vector<Entry> pool;
  std::vector<int> eligible;
  for (std::size_t s = 0; s < batch.scripts.size(); ++s) {
    const ScriptRun& run = batch.scripts[s];
    if (!run.usable()) continue;
    for (const Assignment& a : run.interp->assignments()) {
      if (run.interp->object(a.object).has_executed()) eligible.push_back(static_cast<int>(pool.size()));
      pool.push_back(Entry{static_cast<int>(s), a.lhs_node, a.object, a.name});
    }
  }
  std::map<std::string, std::vector<int>> by_name;
  for (std::size_t i = 0; i < pool.size(); ++i) by_name[pool[i].name].push_back(static_cast<int>(i));
  std::vector<std::string> names;
  for (const auto& [name, _] : by_name) names.push_back(name);

  const int K = options.negatives_k;
  LossTerm term;
  if (K < 2 || static_cast<int>(names.size()) < K) return term;

  std::vector<ad::Var> r_rows, l_rows;
  std::vector<int> targets;
  for (int pick : sample_indices(rng, static_cast<int>(eligible.size()), options.samples_per_loss)) {
    const Entry& e = pool[static_cast<std::size_t>(eligible[static_cast<std::size_t>(pick)])];
    std::vector<std::string> others;
    for (const std::string& n : names) {
      if (n != e.name) others.push_back(n);
    }
    std::vector<int> chosen = sample_indices(rng, static_cast<int>(others.size()), K - 1);
    const int target = uniform(rng, K);
    ad::Var r = batch.scripts[static_cast<std::size_t>(e.script)].interp->executed_or_guessed(e.object);
    int neg = 0;
    for (int c = 0; c < K; ++c) {
      const Entry* cand = &e;
      if (c != target) {
        const std::vector<int>& occ = by_name[others[static_cast<std::size_t>(chosen[static_cast<std::size_t>(neg++)])]];
        cand = &pool[static_cast<std::size_t>(occ[static_cast<std::size_t>(uniform(rng, static_cast<int>(occ.size())))])];
      }
      r_rows.push_back(r);
      l_rows.push_back(batch.scripts[static_cast<std::size_t>(cand->script)].interp->node_guess(cand->node));
    }
    targets.push_back(target);
  }
  if (targets.empty()) return term;
  const int S = static_cast<int>(targets.size());
  ad::Var features = ad::concat_cols(ad::concat_rows(r_rows), ad::concat_rows(l_rows));
  ad::Var logits = ad::reshape(model.alpha()(tape, features), S, K);
  term.loss = ad::scale(ad::cross_entropy_rows(logits, targets), 1.0 / S);
  term.samples = S;
  term.terms = S;
  for (int i = 0; i < S; ++i) {
    if (argmax_row(logits.value(), i) == targets[static_cast<std::size_t>(i)]) ++term.correct;
  }
  return term;
}

LossTerm loss_argument_discrimination(const Model& model, ad::Tape& tape, BatchRun& batch,
                                      const ObjectiveOptions& options, std::mt19937_64& rng) {
  std::vector<std::pair<int, int>> records;  // (script, record)
  std::vector<std::pair<int, int>> objects;  // (script, object)
  for (std::size_t s = 0; s < batch.scripts.size(); ++s) {
    const ScriptRun& run = batch.scripts[s];
    if (!run.usable()) continue;
    for (const LambdaRecord& r : run.interp->records()) {
      if (!r.args.empty()) records.emplace_back(static_cast<int>(s), r.id);
    }
    for (const AbstractObject& o : run.interp->objects()) objects.emplace_back(static_cast<int>(s), o.id);
  }
  LossTerm term;
  if (records.size() < 2 || objects.size() < 2) return term;

  std::vector<ExecRequest> replaced;
  std::vector<ad::Var> rows;
  for (int pick : sample_indices(rng, static_cast<int>(records.size()), options.samples_per_loss)) {
    const auto [s, rid] = records[static_cast<std::size_t>(pick)];
    Interpreter& in = *batch.scripts[static_cast<std::size_t>(s)].interp;
    const LambdaRecord& rec = in.records()[static_cast<std::size_t>(rid)];
    ExecRequest req = in.request_for(rec);
    const int n = static_cast<int>(rec.args.size());
    const int first = options.l2_whole_list ? 0 : uniform(rng, n);
    const int last = options.l2_whole_list ? n : first + 1;
    for (int j = first; j < last; ++j) {
      std::pair<int, int> other;
      do {
        other = objects[static_cast<std::size_t>(uniform(rng, static_cast<int>(objects.size())))];
      } while (other.first == s && other.second == rec.args[static_cast<std::size_t>(j)]);
      auto [g, e] = batch.scripts[static_cast<std::size_t>(other.first)].interp->argument_pair(other.second);
      req.guessed[static_cast<std::size_t>(j)] = g;
      req.executed[static_cast<std::size_t>(j)] = e;
    }
    replaced.push_back(std::move(req));
    rows.push_back(in.executed_or_guessed(rec.result));
  }
  const std::size_t S = replaced.size();
  std::vector<ExecResult> results = model.execute(tape, replaced);
  for (const ExecResult& r : results) rows.push_back(r.ret);
  std::vector<double> labels(S, 1.0);
  labels.resize(2 * S, 0.0);
  return binary_term(model.beta(), tape, std::move(rows), labels, static_cast<int>(S));
}

LossTerm loss_dataflow_discrimination(const Model& model, ad::Tape& tape, BatchRun& batch,
                                      const ObjectiveOptions& options, std::mt19937_64& rng) {
  struct Candidate {
    int script;
    int target;
  };
  std::vector<DataFlowGraph> graphs(batch.scripts.size());
  std::vector<Candidate> eligible;
  for (std::size_t s = 0; s < batch.scripts.size(); ++s) {
    const ScriptRun& run = batch.scripts[s];
    if (!run.usable()) continue;
    graphs[s] = DataFlowGraph::build(*run.interp);
    const int n = graphs[s].node_count();
    for (const AbstractObject& o : run.interp->objects()) {
      if (!o.has_executed()) continue;
      std::vector<char> anc = graphs[s].ancestors_of(o.id);
      const int count = static_cast<int>(std::count(anc.begin(), anc.end(), 1));
      if (count >= 1 && count <= n - 2) eligible.push_back(Candidate{static_cast<int>(s), o.id});
    }
  }
  LossTerm term;
  if (eligible.empty()) return term;

  std::vector<ad::Var> pos, neg;
  for (int pick : sample_indices(rng, static_cast<int>(eligible.size()), options.samples_per_loss)) {
    const Candidate& c = eligible[static_cast<std::size_t>(pick)];
    Interpreter& in = *batch.scripts[static_cast<std::size_t>(c.script)].interp;
    std::vector<char> anc = graphs[static_cast<std::size_t>(c.script)].ancestors_of(c.target);
    std::vector<int> yes, no;
    for (int i = 0; i < static_cast<int>(anc.size()); ++i) {
      if (i == c.target) continue;
      (anc[static_cast<std::size_t>(i)] ? yes : no).push_back(i);
    }
    const int b_pos = yes[static_cast<std::size_t>(uniform(rng, static_cast<int>(yes.size())))];
    const int b_neg = no[static_cast<std::size_t>(uniform(rng, static_cast<int>(no.size())))];
    ad::Var vc = in.executed_or_guessed(c.target);
    pos.push_back(ad::concat_cols(in.executed_or_guessed(b_pos), vc));
    neg.push_back(ad::concat_cols(in.executed_or_guessed(b_neg), vc));
  }
  const std::size_t S = pos.size();
  std::vector<ad::Var> rows = pos;
  rows.insert(rows.end(), neg.begin(), neg.end());
  std::vector<double> labels(S, 1.0);
  labels.resize(2 * S, 0.0);
  return binary_term(model.phi(), tape, std::move(rows), labels, static_cast<int>(S));
}

Losses compute_losses(const Model& model, ad::Tape& tape, BatchRun& batch, const ObjectiveOptions& options,
                      std::uint64_t seed, std::uint64_t step) {
  std::mt19937_64 rng(mix_seed(seed, step));
  Losses out;
  out.l1 = loss_return_variable(model, tape, batch, options, rng);
  out.l2 = loss_argument_discrimination(model, tape, batch, options, rng);
  out.l3 = loss_dataflow_discrimination(model, tape, batch, options, rng);
  std::vector<ad::Var> parts;
  for (const LossTerm* t : {&out.l1, &out.l2, &out.l3}) {
    if (t->loss.valid()) parts.push_back(t->loss);
  }
  if (!parts.empty()) out.total = ad::add_scalars(parts);
  return out;
}

}  // namespace ni
