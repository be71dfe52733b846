#include "ni/batch.hpp"

#include <condition_variable>
#include <mutex>
#include <thread>

#include "ni/codegen.hpp"
#include "ni/errors.hpp"

namespace ni {

const char* run_status_name(RunStatus status) {
  switch (status) {
    case RunStatus::Ok: return "ok";
    case RunStatus::Truncated: return "truncated";
    case RunStatus::CodegenError: return "codegen_error";
    case RunStatus::NotStarted: return "not_started";
  }
  return "?";
}

int identifier_at(const SyntaxTree& tree, long offset) {
  if (offset < 0) return -1;
  int found = -1;
  walk(tree, [&](const AstNode& n) {
    if (found < 0 && n.kind == NodeKind::Identifier && static_cast<long>(n.span.begin) == offset) found = n.node_id;
  });
  return found;
}

namespace {

void interpret(const Model& model, ad::Tape& tape, ScriptRun& run, LambdaChannel& channel, const BatchOptions& options) {
  InterpreterOptions io;
  io.max_args = options.max_args;
  io.snapshots = options.snapshots;
  io.misuse_node = run.misuse_node;
  run.interp = std::make_unique<Interpreter>(*run.tree, io, NeuralContext{&model, &tape, &run.encoded, &channel});
  CodeGenerator gen(*run.tree, *run.interp);
  try {
    gen.generate();
    run.status = RunStatus::Ok;
  } catch (const LambdaRefused&) {
    run.interp->mark_truncated();
    run.status = RunStatus::Truncated;
  } catch (const CodegenError& e) {
    run.status = RunStatus::CodegenError;
    run.error = e.what();
  } catch (const InternalFault& e) {
    run.status = RunStatus::CodegenError;
    run.error = std::string("internal fault: ") + e.what();
  }
  run.statement_counts = gen.statement_counts();
  run.block_counts = gen.block_counts();
}

class CappedDirectChannel : public LambdaChannel {
 public:
  CappedDirectChannel(const Model& model, ad::Tape& tape, BatchRun& batch, long cap)
      : model_(model), tape_(tape), batch_(batch), cap_(cap) {}

  ExecResult run(ExecRequest request) override {
    if (batch_.lambda_calls >= cap_) {
      batch_.cap_reached = true;
      throw LambdaRefused();
    }
    ++batch_.lambda_calls;
    ++batch_.forwards;
    return std::move(model_.execute(tape_, std::span<const ExecRequest>(&request, 1)).front());
  }

 private:
  const Model& model_;
  ad::Tape& tape_;
  BatchRun& batch_;
  long cap_;
};

// Turn-based scheduler: exactly one thread (the coordinator or one worker)
// runs at any time, so the shared tape needs no further locking.
class Pool {
 public:
  Pool(const Model& model, ad::Tape& tape, BatchRun& batch, const BatchOptions& options)
      : model_(model), tape_(tape), batch_(batch), options_(options) {}

  void run(int workers) {
    states_.resize(static_cast<std::size_t>(workers));
    channels_.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) channels_.push_back(std::make_unique<WorkerChannel>(*this, w));
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back([this, w] { worker_main(w); });

    std::exception_ptr failure;
    try {
      while (true) {
        for (int w = 0; w < workers; ++w) {
          if (!states_[static_cast<std::size_t>(w)].finished) give_turn(w);
        }
        std::vector<ExecRequest> pending;
        std::vector<int> owners;
        for (int w = 0; w < workers; ++w) {
          WorkerState& s = states_[static_cast<std::size_t>(w)];
          if (s.waiting) {
            pending.push_back(std::move(s.request));
            owners.push_back(w);
          }
        }
        if (pending.empty()) break;
        std::vector<ExecResult> results = model_.execute(tape_, pending);
        ++batch_.forwards;
        batch_.lambda_calls += static_cast<long>(pending.size());
        for (std::size_t i = 0; i < owners.size(); ++i) {
          states_[static_cast<std::size_t>(owners[i])].result = std::move(results[i]);
        }
      }
    } catch (...) {
      failure = std::current_exception();
      aborted_ = true;
      for (int w = 0; w < workers; ++w) {
        while (!states_[static_cast<std::size_t>(w)].finished) give_turn(w);
      }
    }
    for (std::thread& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
  }

 private:
  struct WorkerState {
    bool waiting = false;
    bool finished = false;
    ExecRequest request;
    ExecResult result;
  };

  class WorkerChannel : public LambdaChannel {
   public:
    WorkerChannel(Pool& pool, int index) : pool_(pool), index_(index) {}
    ExecResult run(ExecRequest request) override { return pool_.request(index_, std::move(request)); }

   private:
    Pool& pool_;
    int index_;
  };

  void give_turn(int w) {
    std::unique_lock<std::mutex> lock(mutex_);
    turn_ = w;
    cv_.notify_all();
    cv_.wait(lock, [&] { return turn_ == -1; });
  }

  // Called on worker w's own thread while it holds the turn.
  void yield_and_wait(int w) {
    std::unique_lock<std::mutex> lock(mutex_);
    turn_ = -1;
    cv_.notify_all();
    cv_.wait(lock, [&] { return turn_ == w; });
  }

  void wait_for_turn(int w) {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [&] { return turn_ == w; });
  }

  void release(int w) {
    std::unique_lock<std::mutex> lock(mutex_);
    states_[static_cast<std::size_t>(w)].finished = true;
    turn_ = -1;
    cv_.notify_all();
  }

  ExecResult request(int w, ExecRequest req) {
    if (aborted_) throw InternalFault("batch aborted");
    long pending = 0;
    for (const WorkerState& s : states_) pending += s.waiting ? 1 : 0;
    if (batch_.lambda_calls + pending >= options_.lambda_cap) {
      batch_.cap_reached = true;
      throw LambdaRefused();
    }
    WorkerState& s = states_[static_cast<std::size_t>(w)];
    s.request = std::move(req);
    s.waiting = true;
    yield_and_wait(w);
    s.waiting = false;
    if (aborted_) throw InternalFault("batch aborted");
    return std::move(s.result);
  }

  void worker_main(int w) {
    wait_for_turn(w);
    while (!aborted_ && !batch_.cap_reached && next_ < batch_.scripts.size()) {
      ScriptRun& run = batch_.scripts[next_++];
      if (run.status == RunStatus::CodegenError) continue;
      interpret(model_, tape_, run, *channels_[static_cast<std::size_t>(w)], options_);
    }
    release(w);
  }

  const Model& model_;
  ad::Tape& tape_;
  BatchRun& batch_;
  const BatchOptions& options_;
  std::vector<WorkerState> states_;
  std::vector<std::unique_ptr<WorkerChannel>> channels_;
  std::mutex mutex_;
  std::condition_variable cv_;
  int turn_ = -2;
  std::size_t next_ = 0;
  bool aborted_ = false;
};

}  // namespace

BatchRun run_batch(const Model& model, ad::Tape& tape, std::span<const BatchItem> items, const BatchOptions& options) {
  BatchRun batch;
  batch.scripts.resize(items.size());
  std::vector<const std::string*> sources;
  std::vector<std::size_t> parsed;
  for (std::size_t i = 0; i < items.size(); ++i) {
    ScriptRun& run = batch.scripts[i];
    try {
      run.tree = std::make_unique<SyntaxTree>(parse(*items[i].code));
    } catch (const SyntaxError& e) {
      run.status = RunStatus::CodegenError;
      run.error = std::string("syntax error: ") + e.what();
      continue;
    }
    run.misuse_node = identifier_at(*run.tree, items[i].misuse_offset);
    sources.push_back(&run.tree->source());
    parsed.push_back(i);
  }

  if (options.serial) {
    for (std::size_t i : parsed) batch.scripts[i].encoded = model.encode_one(tape, batch.scripts[i].tree->source());
    CappedDirectChannel channel(model, tape, batch, options.lambda_cap);
    for (ScriptRun& run : batch.scripts) {
      if (run.status == RunStatus::CodegenError || batch.cap_reached) continue;
      interpret(model, tape, run, channel, options);
    }
    return batch;
  }

  std::vector<Encoded> encoded = model.encode(tape, sources);
  for (std::size_t k = 0; k < parsed.size(); ++k) batch.scripts[parsed[k]].encoded = std::move(encoded[k]);
  Pool pool(model, tape, batch, options);
  pool.run(std::max(1, options.pool));
  return batch;
}

}  // namespace ni
