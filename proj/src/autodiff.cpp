#include "ni/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ni/errors.hpp"

namespace ni::ad {

namespace {

void check_finite(const char* op, const Matrix& m) {
  for (double v : m.values()) {
    if (!std::isfinite(v)) throw InternalFault(std::string("non-finite value produced by ") + op);
  }
}

void require(bool ok, const char* op, const char* what) {
  if (!ok) throw InternalFault(std::string(op) + ": " + what);
}

// C(m x n) += A(m x k) * B(k x n). Each output element accumulates over k in
// ascending order regardless of m, so a row's result does not depend on how
// many other rows share the call.
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  for (int i = 0; i < m; ++i) {
    double* crow = c.row(i);
    const double* arow = a.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.row(p);
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m x n) += A(m x k) * B(n x k)^T
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  const int m = a.rows(), k = a.cols(), n = b.rows();
  for (int i = 0; i < m; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int j = 0; j < n; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C(m x n) += A(k x m)^T * B(k x n)
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  const int k = a.rows(), m = a.cols(), n = b.cols();
  for (int p = 0; p < k; ++p) {
    const double* arow = a.row(p);
    const double* brow = b.row(p);
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c.row(i);
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

double gelu_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }
double gelu_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

// ---- tape ---------------------------------------------------------------

Var Tape::constant(Matrix value) {
  check_finite("constant", value);
  auto node = std::make_unique<Node>();
  node->value = std::move(value);
  Node* raw = node.get();
  nodes_.push_back(std::move(node));
  return Var(raw, this);
}

Var Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(it->second, this);
  auto node = std::make_unique<Node>();
  node->value = p.value;
  node->needs_grad = true;
  node->param = &p;
  Node* raw = node.get();
  nodes_.push_back(std::move(node));
  param_nodes_.emplace(&p, raw);
  return Var(raw, this);
}

Var Tape::record(const char* op, Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Tape::record(const char* op, Matrix value, std::span<const Var> parents, BackwardFn backward) {
  check_finite(op, value);
  auto node = std::make_unique<Node>();
  node->value = std::move(value);
  for (const Var& p : parents) {
    require(&p.tape() == this, op, "operands live on different tapes");
    node->needs_grad = node->needs_grad || p.needs_grad();
  }
  if (node->needs_grad) node->backward = std::move(backward);
  Node* raw = node.get();
  nodes_.push_back(std::move(node));
  return Var(raw, this);
}

void Tape::backward(const Var& loss) {
  if (backward_done_) throw InternalFault("backward called twice on the same tape");
  if (!loss.valid()) throw InternalFault("backward on an empty loss");
  require(loss.rows() == 1 && loss.cols() == 1, "backward", "loss must be a scalar");
  backward_done_ = true;
  if (!loss.needs_grad()) return;
  loss.node()->ensure_grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(n);
    if (n.param != nullptr) {
      Parameter& p = *n.param;
      if (p.grad.empty()) p.grad = Matrix(p.value.rows(), p.value.cols());
      for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += n.grad[i];
      check_finite("parameter gradient", p.grad);
    }
  }
}

// ---- ops ------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul", "inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  gemm_nn(a.value(), b.value(), out);
  Node* an = a.node();
  Node* bn = b.node();
  return a.tape().record("matmul", std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->needs_grad) gemm_nt(self.grad, bn->value, an->ensure_grad());
    if (bn->needs_grad) gemm_tn(an->value, self.grad, bn->ensure_grad());
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require(x.cols() == w.rows(), "linear", "input width does not match weight rows");
  require(b.rows() == 1 && b.cols() == w.cols(), "linear", "bias shape mismatch");
  Matrix out(x.rows(), w.cols());
  for (int i = 0; i < out.rows(); ++i) std::copy_n(b.value().row(0), out.cols(), out.row(i));
  gemm_nn(x.value(), w.value(), out);
  Node* xn = x.node();
  Node* wn = w.node();
  Node* bn = b.node();
  return x.tape().record("linear", std::move(out), {x, w, b}, [xn, wn, bn](Node& self) {
    if (xn->needs_grad) gemm_nt(self.grad, wn->value, xn->ensure_grad());
    if (wn->needs_grad) gemm_tn(xn->value, self.grad, wn->ensure_grad());
    if (bn->needs_grad) {
      Matrix& gb = bn->ensure_grad();
      for (int i = 0; i < self.grad.rows(); ++i) {
        const double* g = self.grad.row(i);
        for (int j = 0; j < self.grad.cols(); ++j) gb[j] += g[j];
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  require(a.value().same_shape(b.value()), "add", "shape mismatch");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  Node* an = a.node();
  Node* bn = b.node();
  return a.tape().record("add", std::move(out), {a, b}, [an, bn](Node& self) {
    for (Node* n : {an, bn}) {
      if (!n->needs_grad) continue;
      Matrix& g = n->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row", "row shape mismatch");
  Matrix out = a.value();
  for (int i = 0; i < out.rows(); ++i) {
    double* o = out.row(i);
    for (int j = 0; j < out.cols(); ++j) o[j] += row.value()[j];
  }
  Node* an = a.node();
  Node* rn = row.node();
  return a.tape().record("add_row", std::move(out), {a, row}, [an, rn](Node& self) {
    if (an->needs_grad) {
      Matrix& g = an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (rn->needs_grad) {
      Matrix& g = rn->ensure_grad();
      for (int i = 0; i < self.grad.rows(); ++i) {
        const double* s = self.grad.row(i);
        for (int j = 0; j < self.grad.cols(); ++j) g[j] += s[j];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require(a.value().same_shape(b.value()), "sub", "shape mismatch");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  Node* an = a.node();
  Node* bn = b.node();
  return a.tape().record("sub", std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->needs_grad) {
      Matrix& g = an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (bn->needs_grad) {
      Matrix& g = bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require(a.value().same_shape(b.value()), "mul", "shape mismatch");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  Node* an = a.node();
  Node* bn = b.node();
  return a.tape().record("mul", std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->needs_grad) {
      Matrix& g = an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->value[i];
    }
    if (bn->needs_grad) {
      Matrix& g = bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->value[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Matrix out = a.value();
  for (double& v : out.values()) v *= factor;
  Node* an = a.node();
  return a.tape().record("scale", std::move(out), {a}, [an, factor](Node& self) {
    Matrix& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Var gelu(const Var& a) {
  Matrix out = a.value();
  for (double& v : out.values()) v = v * gelu_cdf(v);
  Node* an = a.node();
  return a.tape().record("gelu", std::move(out), {a}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = an->value[i];
      g[i] += self.grad[i] * (gelu_cdf(x) + x * gelu_pdf(x));
    }
  });
}

Var sigmoid(const Var& a) {
  Matrix out = a.value();
  for (double& v : out.values()) v = stable_sigmoid(v);
  Node* an = a.node();
  return a.tape().record("sigmoid", std::move(out), {a}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = self.value[i];
      g[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Var softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (int i = 0; i < out.rows(); ++i) {
    double* r = out.row(i);
    const double mx = *std::max_element(r, r + out.cols());
    double total = 0.0;
    for (int j = 0; j < out.cols(); ++j) total += (r[j] = std::exp(r[j] - mx));
    for (int j = 0; j < out.cols(); ++j) r[j] /= total;
  }
  Node* an = a.node();
  return a.tape().record("softmax_rows", std::move(out), {a}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
    for (int i = 0; i < self.value.rows(); ++i) {
      const double* y = self.value.row(i);
      const double* dy = self.grad.row(i);
      double dot = 0.0;
      for (int j = 0; j < self.value.cols(); ++j) dot += y[j] * dy[j];
      double* gr = g.row(i);
      for (int j = 0; j < self.value.cols(); ++j) gr[j] += y[j] * (dy[j] - dot);
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const int n = x.rows(), d = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == d && beta.value().same_shape(gamma.value()), "layer_norm",
          "affine shape mismatch");
  Matrix out(n, d);
  auto xhat = std::make_shared<Matrix>(n, d);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  for (int i = 0; i < n; ++i) {
    const double* xr = x.value().row(i);
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xr[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    double* hr = xhat->row(i);
    double* o = out.row(i);
    for (int j = 0; j < d; ++j) {
      hr[j] = (xr[j] - mean) * inv;
      o[j] = hr[j] * gamma.value()[j] + beta.value()[j];
    }
  }
  Node* xn = x.node();
  Node* gn = gamma.node();
  Node* bn = beta.node();
  return x.tape().record("layer_norm", std::move(out), {x, gamma, beta}, [xn, gn, bn, xhat, inv_std](Node& self) {
    const int rows = self.value.rows(), d = self.value.cols();
    if (gn->needs_grad || bn->needs_grad) {
      for (int i = 0; i < rows; ++i) {
        const double* dy = self.grad.row(i);
        const double* hr = xhat->row(i);
        if (gn->needs_grad) {
          Matrix& gg = gn->ensure_grad();
          for (int j = 0; j < d; ++j) gg[j] += dy[j] * hr[j];
        }
        if (bn->needs_grad) {
          Matrix& gb = bn->ensure_grad();
          for (int j = 0; j < d; ++j) gb[j] += dy[j];
        }
      }
    }
    if (!xn->needs_grad) return;
    Matrix& gx = xn->ensure_grad();
    std::vector<double> dxhat(d);
    for (int i = 0; i < rows; ++i) {
      const double* dy = self.grad.row(i);
      const double* hr = xhat->row(i);
      double sum_d = 0.0, sum_dh = 0.0;
      for (int j = 0; j < d; ++j) {
        dxhat[j] = dy[j] * gn->value[j];
        sum_d += dxhat[j];
        sum_dh += dxhat[j] * hr[j];
      }
      const double inv = (*inv_std)[i];
      double* g = gx.row(i);
      for (int j = 0; j < d; ++j) g[j] += inv / d * (d * dxhat[j] - sum_d - hr[j] * sum_dh);
    }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require(a.rows() == b.rows(), "concat_cols", "row counts differ");
  const int n = a.rows(), ca = a.cols(), cb = b.cols();
  Matrix out(n, ca + cb);
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.value().row(i), ca, out.row(i));
    std::copy_n(b.value().row(i), cb, out.row(i) + ca);
  }
  Node* an = a.node();
  Node* bn = b.node();
  return a.tape().record("concat_cols", std::move(out), {a, b}, [an, bn, ca, cb](Node& self) {
    for (int i = 0; i < self.grad.rows(); ++i) {
      const double* s = self.grad.row(i);
      if (an->needs_grad) {
        double* g = an->ensure_grad().row(i);
        for (int j = 0; j < ca; ++j) g[j] += s[j];
      }
      if (bn->needs_grad) {
        double* g = bn->ensure_grad().row(i);
        for (int j = 0; j < cb; ++j) g[j] += s[ca + j];
      }
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const int cols = parts.front().cols();
  int rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows", "column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Node*> nodes;
  nodes.reserve(parts.size());
  int r = 0;
  for (const Var& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.row(r));
    r += p.rows();
    nodes.push_back(p.node());
  }
  return parts.front().tape().record("concat_rows", std::move(out), parts, [nodes = std::move(nodes)](Node& self) {
    std::size_t offset = 0;
    for (Node* n : nodes) {
      const std::size_t sz = n->value.size();
      if (n->needs_grad) {
        Matrix& g = n->ensure_grad();
        for (std::size_t i = 0; i < sz; ++i) g[i] += self.grad[offset + i];
      }
      offset += sz;
    }
  });
}

Var slice_rows(const Var& a, int begin, int count) {
  require(begin >= 0 && count >= 0 && begin + count <= a.rows(), "slice_rows", "range out of bounds");
  const int cols = a.cols();
  Matrix out(count, cols);
  if (count > 0) std::copy_n(a.value().row(begin), static_cast<std::size_t>(count) * cols, out.row(0));
  Node* an = a.node();
  return a.tape().record("slice_rows", std::move(out), {a}, [an, begin, count, cols](Node& self) {
    if (count == 0) return;
    double* g = an->ensure_grad().row(begin);
    for (std::size_t i = 0; i < static_cast<std::size_t>(count) * cols; ++i) g[i] += self.grad[i];
  });
}

Var reshape(const Var& a, int rows, int cols) {
  require(rows >= 0 && cols >= 0 && static_cast<std::size_t>(rows) * cols == a.value().size(), "reshape",
          "element count changes");
  Matrix out(rows, cols);
  std::copy(a.value().values().begin(), a.value().values().end(), out.values().begin());
  Node* an = a.node();
  return a.tape().record("reshape", std::move(out), {a}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var gather_rows(const Var& table, std::span<const int> indices) {
  const int cols = table.cols();
  Matrix out(static_cast<int>(indices.size()), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < table.rows(), "gather_rows", "index out of range");
    std::copy_n(table.value().row(indices[i]), cols, out.row(static_cast<int>(i)));
  }
  Node* tn = table.node();
  std::vector<int> idx(indices.begin(), indices.end());
  return table.tape().record("gather_rows", std::move(out), {table}, [tn, idx = std::move(idx), cols](Node& self) {
    Matrix& g = tn->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* gr = g.row(idx[i]);
      const double* s = self.grad.row(static_cast<int>(i));
      for (int j = 0; j < cols; ++j) gr[j] += s[j];
    }
  });
}

Var max_pool_rows(const Var& a, std::span<const int> rows) {
  require(!rows.empty(), "max_pool_rows", "empty row selection");
  const int cols = a.cols();
  Matrix out(1, cols);
  std::vector<int> argmax(cols, rows.front());
  for (int j = 0; j < cols; ++j) out[j] = a.value()(rows.front(), j);
  for (int r : rows) {
    require(r >= 0 && r < a.rows(), "max_pool_rows", "row out of range");
    const double* ar = a.value().row(r);
    for (int j = 0; j < cols; ++j) {
      if (ar[j] > out[j]) {
        out[j] = ar[j];
        argmax[j] = r;
      }
    }
  }
  Node* an = a.node();
  return a.tape().record("max_pool_rows", std::move(out), {a}, [an, argmax = std::move(argmax)](Node& self) {
    Matrix& g = an->ensure_grad();
    for (std::size_t j = 0; j < argmax.size(); ++j) g(argmax[j], static_cast<int>(j)) += self.grad[j];
  });
}

Var attention(const Var& q, const Var& k, const Var& v, const Segments& segments, int heads,
              const std::vector<std::uint8_t>* key_mask) {
  const int n = q.rows(), width = q.cols();
  require(k.rows() == n && v.rows() == n && k.cols() == width && v.cols() == width, "attention", "q/k/v shape mismatch");
  require(heads > 0 && width % heads == 0, "attention", "width not divisible by heads");
  require(segments.total() == n, "attention", "segments do not cover all rows");
  require(key_mask == nullptr || static_cast<int>(key_mask->size()) == n, "attention", "mask length mismatch");
  const int dh = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  // probs[s][h] is a (len x len) row-major block for segment s, head h.
  auto probs = std::make_shared<std::vector<std::vector<double>>>();
  probs->reserve(static_cast<std::size_t>(segments.count()) * heads);
  Matrix out(n, width);
  std::vector<double> scores;
  for (int s = 0; s < segments.count(); ++s) {
    const int a = segments.starts[s], len = segments.starts[s + 1] - a;
    for (int h = 0; h < heads; ++h) {
      std::vector<double> p(static_cast<std::size_t>(len) * len, 0.0);
      const int c0 = h * dh;
      for (int i = 0; i < len; ++i) {
        const double* qi = q.value().row(a + i) + c0;
        double mx = -std::numeric_limits<double>::infinity();
        scores.assign(len, 0.0);
        for (int j = 0; j < len; ++j) {
          if (key_mask != nullptr && (*key_mask)[a + j] == 0) continue;
          const double* kj = k.value().row(a + j) + c0;
          double dot = 0.0;
          for (int c = 0; c < dh; ++c) dot += qi[c] * kj[c];
          scores[j] = dot * inv_sqrt;
          mx = std::max(mx, scores[j]);
        }
        if (!std::isfinite(mx)) continue;
        double total = 0.0;
        double* pr = p.data() + static_cast<std::size_t>(i) * len;
        for (int j = 0; j < len; ++j) {
          if (key_mask != nullptr && (*key_mask)[a + j] == 0) continue;
          total += (pr[j] = std::exp(scores[j] - mx));
        }
        double* oi = out.row(a + i) + c0;
        for (int j = 0; j < len; ++j) {
          if (pr[j] == 0.0) continue;
          pr[j] /= total;
          const double* vj = v.value().row(a + j) + c0;
          for (int c = 0; c < dh; ++c) oi[c] += pr[j] * vj[c];
        }
      }
      probs->push_back(std::move(p));
    }
  }
  Node* qn = q.node();
  Node* kn = k.node();
  Node* vn = v.node();
  return q.tape().record(
      "attention", std::move(out), {q, k, v}, [qn, kn, vn, segments, heads, dh, inv_sqrt, probs](Node& self) {
        Matrix* gq = qn->needs_grad ? &qn->ensure_grad() : nullptr;
        Matrix* gk = kn->needs_grad ? &kn->ensure_grad() : nullptr;
        Matrix* gv = vn->needs_grad ? &vn->ensure_grad() : nullptr;
        std::vector<double> dp;
        std::size_t block = 0;
        for (int s = 0; s < segments.count(); ++s) {
          const int a = segments.starts[s], len = segments.starts[s + 1] - a;
          for (int h = 0; h < heads; ++h, ++block) {
            const std::vector<double>& p = (*probs)[block];
            const int c0 = h * dh;
            for (int i = 0; i < len; ++i) {
              const double* pr = p.data() + static_cast<std::size_t>(i) * len;
              const double* doi = self.grad.row(a + i) + c0;
              dp.assign(len, 0.0);
              double weighted = 0.0;
              for (int j = 0; j < len; ++j) {
                if (pr[j] == 0.0) continue;
                const double* vj = vn->value.row(a + j) + c0;
                double dot = 0.0;
                for (int c = 0; c < dh; ++c) dot += doi[c] * vj[c];
                dp[j] = dot;
                weighted += pr[j] * dot;
                if (gv != nullptr) {
                  double* gvj = gv->row(a + j) + c0;
                  for (int c = 0; c < dh; ++c) gvj[c] += pr[j] * doi[c];
                }
              }
              const double* qi = qn->value.row(a + i) + c0;
              for (int j = 0; j < len; ++j) {
                if (pr[j] == 0.0) continue;
                const double ds = pr[j] * (dp[j] - weighted) * inv_sqrt;
                if (gq != nullptr) {
                  const double* kj = kn->value.row(a + j) + c0;
                  double* gqi = gq->row(a + i) + c0;
                  for (int c = 0; c < dh; ++c) gqi[c] += ds * kj[c];
                }
                if (gk != nullptr) {
                  double* gkj = gk->row(a + j) + c0;
                  for (int c = 0; c < dh; ++c) gkj[c] += ds * qi[c];
                }
              }
            }
          }
        }
      });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  for (double v : a.value().values()) out[0] += v;
  Node* an = a.node();
  return a.tape().record("sum", std::move(out), {a}, [an](Node& self) {
    Matrix& g = an->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
  });
}

Var add_scalars(std::span<const Var> scalars) {
  require(!scalars.empty(), "add_scalars", "no inputs");
  Matrix out(1, 1);
  std::vector<Node*> nodes;
  for (const Var& s : scalars) {
    require(s.rows() == 1 && s.cols() == 1, "add_scalars", "non-scalar input");
    out[0] += s.scalar();
    nodes.push_back(s.node());
  }
  return scalars.front().tape().record("add_scalars", std::move(out), scalars, [nodes = std::move(nodes)](Node& self) {
    for (Node* n : nodes) {
      if (n->needs_grad) n->ensure_grad()[0] += self.grad[0];
    }
  });
}

Var cross_entropy(const Var& logits, int target) {
  require(logits.rows() == 1 && target >= 0 && target < logits.cols(), "cross_entropy", "bad logits/target");
  const int k = logits.cols();
  const double* z = logits.value().row(0);
  const double mx = *std::max_element(z, z + k);
  double total = 0.0;
  for (int j = 0; j < k; ++j) total += std::exp(z[j] - mx);
  const double lse = mx + std::log(total);
  Matrix out(1, 1);
  out[0] = lse - z[target];
  Node* ln = logits.node();
  return logits.tape().record("cross_entropy", std::move(out), {logits}, [ln, target, lse](Node& self) {
    Matrix& g = ln->ensure_grad();
    for (int j = 0; j < g.cols(); ++j) {
      const double p = std::exp(ln->value[j] - lse);
      g[j] += self.grad[0] * (p - (j == target ? 1.0 : 0.0));
    }
  });
}

Var bce_with_logits(const Var& logit, double label) {
  require(logit.rows() == 1 && logit.cols() == 1, "bce_with_logits", "logit must be 1x1");
  const double z = logit.scalar();
  Matrix out(1, 1);
  out[0] = std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
  Node* ln = logit.node();
  return logit.tape().record("bce_with_logits", std::move(out), {logit}, [ln, label](Node& self) {
    ln->ensure_grad()[0] += self.grad[0] * (stable_sigmoid(ln->value[0]) - label);
  });
}

Var cross_entropy_rows(const Var& logits, std::span<const int> targets) {
  require(static_cast<int>(targets.size()) == logits.rows(), "cross_entropy_rows", "one target per row");
  const int k = logits.cols();
  std::vector<double> lse(targets.size());
  Matrix out(1, 1);
  for (int r = 0; r < logits.rows(); ++r) {
    require(targets[r] >= 0 && targets[r] < k, "cross_entropy_rows", "target out of range");
    const double* z = logits.value().row(r);
    const double mx = *std::max_element(z, z + k);
    double total = 0.0;
    for (int j = 0; j < k; ++j) total += std::exp(z[j] - mx);
    lse[r] = mx + std::log(total);
    out[0] += lse[r] - z[targets[r]];
  }
  Node* ln = logits.node();
  std::vector<int> t(targets.begin(), targets.end());
  return logits.tape().record("cross_entropy_rows", std::move(out), {logits},
                              [ln, t = std::move(t), lse = std::move(lse)](Node& self) {
                                Matrix& g = ln->ensure_grad();
                                for (int r = 0; r < g.rows(); ++r) {
                                  double* gr = g.row(r);
                                  const double* z = ln->value.row(r);
                                  for (int j = 0; j < g.cols(); ++j) {
                                    const double p = std::exp(z[j] - lse[r]);
                                    gr[j] += self.grad[0] * (p - (j == t[r] ? 1.0 : 0.0));
                                  }
                                }
                              });
}

Var bce_rows(const Var& logits, std::span<const double> labels) {
  require(logits.cols() == 1 && static_cast<int>(labels.size()) == logits.rows(), "bce_rows",
          "logits must be n x 1 with one label per row");
  Matrix out(1, 1);
  for (int r = 0; r < logits.rows(); ++r) {
    const double z = logits.value()[r];
    out[0] += std::max(z, 0.0) - z * labels[r] + std::log1p(std::exp(-std::abs(z)));
  }
  Node* ln = logits.node();
  std::vector<double> y(labels.begin(), labels.end());
  return logits.tape().record("bce_rows", std::move(out), {logits}, [ln, y = std::move(y)](Node& self) {
    Matrix& g = ln->ensure_grad();
    for (std::size_t r = 0; r < y.size(); ++r) g[r] += self.grad[0] * (stable_sigmoid(ln->value[r]) - y[r]);
  });
}

}  // namespace ni::ad
