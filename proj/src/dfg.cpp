#include "ni/dfg.hpp"

#include "ni/errors.hpp"

namespace ni {

DataFlowGraph::DataFlowGraph(int nodes)
    : succ_(static_cast<std::size_t>(nodes)), pred_(static_cast<std::size_t>(nodes)) {}

DataFlowGraph DataFlowGraph::build(const Interpreter& interp) {
  DataFlowGraph g(static_cast<int>(interp.objects().size()));
  for (const LambdaRecord& r : interp.records()) {
    for (int a : r.args) g.add_edge(a, r.result);
  }
  for (const auto& [from, to] : interp.view_edges()) g.add_edge(from, to);
  return g;
}

void DataFlowGraph::add_edge(int from, int to) {
  if (from < 0 || to < 0 || from >= node_count() || to >= node_count()) throw InternalFault("dfg: edge out of range");
  succ_[static_cast<std::size_t>(from)].push_back(to);
  pred_[static_cast<std::size_t>(to)].push_back(from);
  edges_.emplace_back(from, to);
}

std::vector<char> DataFlowGraph::reachable_from(int source) const {
  std::vector<char> seen(succ_.size(), 0);
  std::vector<int> stack = {source};
  seen[static_cast<std::size_t>(source)] = 1;
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    for (int s : succ_[static_cast<std::size_t>(n)]) {
      if (!seen[static_cast<std::size_t>(s)]) {
        seen[static_cast<std::size_t>(s)] = 1;
        stack.push_back(s);
      }
    }
  }
  return seen;
}

std::vector<char> DataFlowGraph::ancestors_of(int target) const {
  std::vector<char> seen(pred_.size(), 0);
  std::vector<int> stack = {target};
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    for (int p : pred_[static_cast<std::size_t>(n)]) {
      if (!seen[static_cast<std::size_t>(p)]) {
        seen[static_cast<std::size_t>(p)] = 1;
        stack.push_back(p);
      }
    }
  }
  return seen;
}

bool DataFlowGraph::has_path(int from, int to) const {
  if (from == to) return false;
  return reachable_from(from)[static_cast<std::size_t>(to)] != 0;
}

bool DataFlowGraph::acyclic() const {
  // Kahn's algorithm.
  std::vector<int> indeg(succ_.size(), 0);
  for (const auto& [f, t] : edges_) ++indeg[static_cast<std::size_t>(t)];
  std::vector<int> ready;
  for (std::size_t i = 0; i < indeg.size(); ++i) {
    if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
  }
  std::size_t done = 0;
  while (!ready.empty()) {
    const int n = ready.back();
    ready.pop_back();
    ++done;
    for (int s : succ_[static_cast<std::size_t>(n)]) {
      if (--indeg[static_cast<std::size_t>(s)] == 0) ready.push_back(s);
    }
  }
  return done == succ_.size();
}

}  // namespace ni
