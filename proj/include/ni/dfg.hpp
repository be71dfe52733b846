#pragma once

#include <utility>
#include <vector>

#include "ni/interpreter.hpp"

namespace ni {

// Nodes are object ids of one script. One edge per (argument, result) pair
// of every lambda record (duplicates kept), plus original -> view edges for
// contaminated views.
class DataFlowGraph {
 public:
  DataFlowGraph() = default;
  explicit DataFlowGraph(int nodes);

  static DataFlowGraph build(const Interpreter& interp);

  void add_edge(int from, int to);
  int node_count() const { return static_cast<int>(succ_.size()); }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& successors(int n) const { return succ_.at(static_cast<std::size_t>(n)); }
  const std::vector<int>& predecessors(int n) const { return pred_.at(static_cast<std::size_t>(n)); }

  // reached[i] != 0 iff i is reachable from `source` (source included).
  std::vector<char> reachable_from(int source) const;
  // marks[i] != 0 iff a path i -> target of length >= 1 exists.
  std::vector<char> ancestors_of(int target) const;
  bool has_path(int from, int to) const;
  bool acyclic() const;

 private:
  std::vector<std::vector<int>> succ_;
  std::vector<std::vector<int>> pred_;
  std::vector<std::pair<int, int>> edges_;
};

}  // namespace ni
