#pragma once

// Tape-based reverse-mode differentiation over dense row-major matrices.
//
// Every op appends a node to the tape in creation order, so the tape is
// already a topological order of the computation graph. backward() walks it
// in reverse. Parameters are leaves whose gradient is accumulated into the
// owning Parameter, which outlives any tape.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ni/matrix.hpp"

namespace ni::ad {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix first_moment;
  Matrix second_moment;
  bool decay = true;
};

struct Node;
using BackwardFn = std::function<void(Node&)>;

struct Node {
  Matrix value;
  Matrix grad;
  bool needs_grad = false;
  Parameter* param = nullptr;
  BackwardFn backward;

  Matrix& ensure_grad() {
    if (grad.empty() && !value.empty()) grad = Matrix(value.rows(), value.cols());
    return grad;
  }
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Node* node, Tape* tape) : node_(node), tape_(tape) {}

  bool valid() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  int rows() const { return node_->value.rows(); }
  int cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value[0]; }
  bool needs_grad() const { return node_->needs_grad; }
  Node* node() const { return node_; }
  Tape& tape() const { return *tape_; }

  friend bool operator==(const Var& a, const Var& b) { return a.node_ == b.node_; }

 private:
  Node* node_ = nullptr;
  Tape* tape_ = nullptr;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var param(Parameter& p);

  // Appends an op result. The backward function is dropped when no parent
  // requires a gradient.
  Var record(const char* op, Matrix value, std::initializer_list<Var> parents, BackwardFn backward);
  Var record(const char* op, Matrix value, std::span<const Var> parents, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and propagates. A tape supports one backward.
  void backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
  std::unordered_map<Parameter*, Node*> param_nodes_;
  bool backward_done_ = false;
};

// Ragged batch layout: rows [starts[i], starts[i+1]) form segment i.
struct Segments {
  std::vector<int> starts;

  static Segments single(int rows) { return Segments{{0, rows}}; }
  int count() const { return static_cast<int>(starts.size()) - 1; }
  int total() const { return starts.empty() ? 0 : starts.back(); }
};

// ---- forward ops -------------------------------------------------------

Var matmul(const Var& a, const Var& b);
// x * w + b with b broadcast over rows.
Var linear(const Var& x, const Var& w, const Var& b);
Var add(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var softmax_rows(const Var& a);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-12);
Var concat_cols(const Var& a, const Var& b);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(const Var& a, int begin, int count);
// Same data, new row-major shape.
Var reshape(const Var& a, int rows, int cols);
Var gather_rows(const Var& table, std::span<const int> indices);
// Element-wise maximum over the selected rows; result is 1 x cols.
Var max_pool_rows(const Var& a, std::span<const int> rows);
// Multi-head scaled dot-product attention computed independently inside
// each segment. key_mask, when given, has one entry per row; rows with 0 are
// never attended to. A query with no attendable key yields a zero row.
Var attention(const Var& q, const Var& k, const Var& v, const Segments& segments, int heads,
              const std::vector<std::uint8_t>* key_mask = nullptr);
Var sum(const Var& a);
Var add_scalars(std::span<const Var> scalars);

// ---- losses ------------------------------------------------------------

// Softmax cross-entropy of a 1 x K logit row against class `target`.
Var cross_entropy(const Var& logits, int target);
// Binary cross-entropy of a 1 x 1 logit against a label in [0, 1].
Var bce_with_logits(const Var& logit, double label);
// Summed row-wise softmax cross-entropy: one target class per row.
Var cross_entropy_rows(const Var& logits, std::span<const int> targets);
// Summed binary cross-entropy of an n x 1 logit column.
Var bce_rows(const Var& logits, std::span<const double> labels);

}  // namespace ni::ad
