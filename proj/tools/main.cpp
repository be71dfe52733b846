#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ni/ast.hpp"
#include "ni/batch.hpp"
#include "ni/checkpoint.hpp"
#include "ni/codegen.hpp"
#include "ni/config.hpp"
#include "ni/corpus.hpp"
#include "ni/errors.hpp"
#include "ni/interpreter.hpp"
#include "ni/synth.hpp"
#include "ni/trainer.hpp"

using namespace ni;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kCodegen = 2;
constexpr int kInternal = 3;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Config resolve_config(const std::string& file, const std::vector<std::string>& overrides, int jobs) {
  Config c;
  if (!file.empty()) load_config_file(c, file);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (jobs > 0) c.pool = std::min(c.effective_pool(), jobs);
  validate(c);
  return c;
}

std::vector<Script> load_filtered(const std::string& path, const Config& c, FilterReport* report) {
  LoadResult loaded = load_corpus(path);
  for (const std::string& e : loaded.errors) std::cerr << "warning: " << e << '\n';
  FilterOptions fo;
  fo.max_chars = c.max_chars;
  fo.max_args = c.max_args;
  FilterResult filtered = apply_filters(loaded.scripts, fo);
  if (report) *report = filtered.report;
  return std::move(filtered.retained);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

// ---- trace ----

struct TraceArgs {
  std::string file;
  bool pseudocode = false;
  bool dump_memory = false;
  bool dump_vectors = false;
  std::string checkpoint;
  std::uint64_t seed = 1;
};

int cmd_trace(const TraceArgs& a) {
  SyntaxTree tree = parse(read_text(a.file));
  const bool neural = a.dump_vectors || !a.checkpoint.empty();
  std::unique_ptr<Model> model;
  if (neural) {
    if (!a.checkpoint.empty()) {
      model = load_checkpoint(a.checkpoint).model;
    } else {
      Config c;
      c.seed = a.seed;
      model = make_model(c, {make_script(tree.source())});
    }
  }
  ad::Tape tape;
  Encoded enc;
  std::unique_ptr<DirectChannel> channel;
  std::unique_ptr<Interpreter> interp;
  if (model) {
    enc = model->encode_one(tape, tree.source());
    channel = std::make_unique<DirectChannel>(*model, tape);
    interp = std::make_unique<Interpreter>(tree, InterpreterOptions{}, NeuralContext{model.get(), &tape, &enc, channel.get()});
  } else {
    interp = std::make_unique<Interpreter>(tree);
  }
  CodeGenerator gen(tree, *interp);
  try {
    gen.generate();
  } catch (const CodegenError& e) {
    std::cout << (a.pseudocode ? format_pseudocode(interp->trace()) : format_trace(interp->trace()));
    std::cerr << "codegen error: " << e.what() << " (node " << e.node_id() << ", "
              << node_kind_name(tree.node(e.node_id()).kind) << ")\n";
    return kCodegen;
  }
  std::cout << (a.pseudocode ? format_pseudocode(interp->trace()) : format_trace(interp->trace()));
  if (a.dump_memory || a.dump_vectors) std::cout << interp->memory_dump(a.dump_vectors) << '\n';
  return kOk;
}

// ---- corpus ----

struct StatsArgs {
  std::string corpus;
  std::string out_dir;
  long max_chars = 10000;
  int max_args = 16;
};

int cmd_stats(const StatsArgs& a) {
  LoadResult loaded = load_corpus(a.corpus);
  for (const std::string& e : loaded.errors) std::cerr << "warning: " << e << '\n';
  FilterOptions fo;
  fo.max_chars = a.max_chars;
  fo.max_args = a.max_args;
  FilterResult r = apply_filters(loaded.scripts, fo);
  const std::string report = to_json(r.report);
  std::cout << report << '\n';
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    std::vector<long> chars, lambdas;
    for (const ScriptStats& s : r.stats) {
      chars.push_back(s.chars);
      if (s.drop_reason.empty()) lambdas.push_back(s.lambda_calls);
    }
    open_out((fs::path(a.out_dir) / "filter_report.json").string()) << report << '\n';
    open_out((fs::path(a.out_dir) / "chars_histogram.csv").string()) << histogram_csv(chars, 500);
    open_out((fs::path(a.out_dir) / "lambda_histogram.csv").string()) << histogram_csv(lambdas, 10);
    std::ofstream drops = open_out((fs::path(a.out_dir) / "dropped.tsv").string());
    for (std::size_t i = 0; i < r.stats.size(); ++i) {
      if (!r.stats[i].drop_reason.empty()) drops << loaded.scripts[i].id << '\t' << r.stats[i].drop_reason << '\n';
    }
  }
  return kOk;
}

struct SynthArgs {
  std::string out;
  int count = 100;
  std::uint64_t seed = 1;
  bool misuse = false;
  int min_statements = 8;
  int max_statements = 20;
};

int cmd_synth(const SynthArgs& a) {
  SynthOptions o;
  o.min_statements = a.min_statements;
  o.max_statements = a.max_statements;
  if (o.min_statements < 1 || o.max_statements < o.min_statements) throw ConfigError("bad statement range");
  std::vector<Script> scripts;
  for (const SynthScript& s : a.misuse ? synthesize_misuse(a.seed, a.count, o) : synthesize(a.seed, a.count, o)) {
    scripts.push_back(from_synth(s, a.misuse));
  }
  write_corpus_jsonl(a.out, scripts);
  std::cout << "wrote " << scripts.size() << " scripts to " << a.out << '\n';
  return kOk;
}

// ---- training ----

struct TrainArgs {
  std::string corpus;
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::string metrics;
  std::string eval_corpus;
  int jobs = 0;
};

int cmd_train(const TrainArgs& a, bool misuse) {
  Config c = resolve_config(a.config, a.sets, a.jobs);
  FilterReport report;
  std::vector<Script> corpus = load_filtered(a.corpus, c, &report);
  std::cerr << "corpus: " << to_json(report) << '\n';
  if (corpus.empty()) throw ConfigError("no usable scripts in " + a.corpus);
  std::unique_ptr<Model> model = make_model(c, corpus);
  std::ofstream log_file;
  std::ostream* log = nullptr;
  if (!a.metrics.empty()) {
    log_file = open_out(a.metrics);
    log = &log_file;
  }
  TrainOutcome outcome = misuse ? misuse_train(*model, c, corpus, log) : train(*model, c, corpus, log);
  save_checkpoint(a.out, *model, c);

  nlohmann::ordered_json summary;
  summary["steps"] = outcome.steps;
  summary["seconds"] = outcome.seconds;
  summary["budget_exhausted"] = outcome.budget_exhausted;
  summary["final_train"] = misuse ? to_json(misuse_evaluate(*model, c, corpus, nullptr)) : to_json(evaluate(*model, c, corpus));
  if (!a.eval_corpus.empty()) {
    std::vector<Script> held = load_filtered(a.eval_corpus, c, nullptr);
    summary["held_out"] = misuse ? to_json(misuse_evaluate(*model, c, held, nullptr)) : to_json(evaluate(*model, c, held));
  }
  if (log) {
    nlohmann::ordered_json line;
    line["final"] = summary;
    *log << line.dump() << '\n';
  }
  std::cout << summary.dump(2) << '\n';
  return kOk;
}

struct EvalArgs {
  std::string corpus;
  std::string checkpoint;
  std::string predictions;
  int jobs = 0;
};

int cmd_eval(const EvalArgs& a, bool misuse) {
  LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  if (a.jobs > 0) ck.config.pool = std::min(ck.config.effective_pool(), a.jobs);
  std::vector<Script> corpus = load_filtered(a.corpus, ck.config, nullptr);
  if (!misuse) {
    std::cout << to_json(evaluate(*ck.model, ck.config, corpus)).dump(2) << '\n';
    return kOk;
  }
  std::vector<MisusePrediction> preds;
  MisuseScores scores = misuse_evaluate(*ck.model, ck.config, corpus, &preds);
  if (!a.predictions.empty()) {
    std::ofstream out = open_out(a.predictions);
    for (const MisusePrediction& p : preds) out << to_json(p) << '\n';
  }
  std::cout << to_json(scores).dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural interpretation of Python-subset programs"};
  app.require_subcommand(1);

  TraceArgs trace;
  auto* t = app.add_subcommand("trace", "Print the instruction trace of one file");
  t->add_option("file", trace.file, "Python source file")->required();
  t->add_flag("--pseudocode", trace.pseudocode, "Readable commentary instead of the trace format");
  t->add_flag("--dump-memory", trace.dump_memory, "Print the interpreter memory after the trace");
  t->add_flag("--dump-vectors", trace.dump_vectors, "Include guessed and executed vectors in the memory dump");
  t->add_option("--checkpoint", trace.checkpoint, "Model for --dump-vectors (default: fresh parameters)");
  t->add_option("--seed", trace.seed, "Seed for fresh parameters");

  StatsArgs stats;
  auto* s = app.add_subcommand("stats", "Filter report and histograms for a corpus");
  s->add_option("--corpus", stats.corpus, "Directory of .py files or JSON-lines file")->required();
  s->add_option("--out-dir", stats.out_dir, "Write filter_report.json and histogram CSVs here");
  s->add_option("--max-chars", stats.max_chars, "Length limit in characters");
  s->add_option("--max-args", stats.max_args, "Argument limit per call");

  SynthArgs synth;
  auto* y = app.add_subcommand("synth", "Generate a synthetic JSON-lines corpus");
  y->add_option("--out", synth.out, "Output JSON-lines file")->required();
  y->add_option("--count", synth.count, "Number of scripts");
  y->add_option("--seed", synth.seed, "Generator seed");
  y->add_flag("--misuse", synth.misuse, "Inject variable misuses into half of the scripts and write labels");
  y->add_option("--min-statements", synth.min_statements, "Smallest script size");
  y->add_option("--max-statements", synth.max_statements, "Largest script size");

  TrainArgs train_args, misuse_train_args;
  auto add_train = [&](CLI::App* cmd, TrainArgs& ta) {
    cmd->add_option("--corpus", ta.corpus, "Training corpus")->required();
    cmd->add_option("--config", ta.config, "key = value config file");
    cmd->add_option("--set", ta.sets, "Override one config key (key=value), repeatable");
    cmd->add_option("--out", ta.out, "Checkpoint path")->required();
    cmd->add_option("--metrics", ta.metrics, "Metrics JSON-lines path");
    cmd->add_option("--eval-corpus", ta.eval_corpus, "Held-out corpus evaluated after training");
    cmd->add_option("--jobs", ta.jobs, "Cap on concurrent interpreter workers");
  };
  auto* tr = app.add_subcommand("train", "Train on the three abstract-semantics losses");
  add_train(tr, train_args);
  auto* mt = app.add_subcommand("misuse-train", "Train the variable-misuse heads end to end");
  add_train(mt, misuse_train_args);

  EvalArgs eval_args, misuse_args;
  auto* ev = app.add_subcommand("eval", "Held-out losses and accuracies of a checkpoint");
  ev->add_option("--corpus", eval_args.corpus, "Corpus")->required();
  ev->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint")->required();
  ev->add_option("--jobs", eval_args.jobs, "Cap on concurrent interpreter workers");
  auto* mu = app.add_subcommand("misuse", "Localize and repair variable misuses");
  mu->add_option("--corpus", misuse_args.corpus, "Labelled JSON-lines corpus")->required();
  mu->add_option("--checkpoint", misuse_args.checkpoint, "Checkpoint from misuse-train")->required();
  mu->add_option("--predictions", misuse_args.predictions, "Prediction JSON-lines output");
  mu->add_option("--jobs", misuse_args.jobs, "Cap on concurrent interpreter workers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*t) return cmd_trace(trace);
    if (*s) return cmd_stats(stats);
    if (*y) return cmd_synth(synth);
    if (*tr) return cmd_train(train_args, false);
    if (*mt) return cmd_train(misuse_train_args, true);
    if (*ev) return cmd_eval(eval_args, false);
    if (*mu) return cmd_eval(misuse_args, true);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const SyntaxError& e) {
    std::cerr << "syntax error at line " << e.line() << ", column " << e.column() << ": " << e.what() << '\n';
    return kCodegen;
  } catch (const CodegenError& e) {
    std::cerr << "codegen error: " << e.what() << '\n';
    return kCodegen;
  } catch (const InternalFault& e) {
    std::cerr << "internal fault: " << e.what() << '\n';
    return kInternal;
  } catch (const std::exception& e) {
    std::cerr << "internal fault: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
