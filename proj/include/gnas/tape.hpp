#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gnas/errors.hpp"
#include "gnas/graph.hpp"
#include "gnas/kinds.hpp"
#include "gnas/params.hpp"
#include "gnas/rng.hpp"

namespace gnas {

// Fixed sparse operator in CSR form. `w` may be empty when only the
// neighborhood structure is needed (attention, max aggregation).
template <class S>
struct CsrAdj {
  int n = 0;
  std::vector<int> row_ptr;  // n + 1
  std::vector<int> col;
  std::vector<S> w;

  int nnz() const { return static_cast<int>(col.size()); }

  // Symmetric GCN normalization carried over from the NormAdj coefficients.
  static CsrAdj from(const NormAdj& adj) {
    CsrAdj a;
    a.n = adj.num_nodes;
    a.row_ptr = adj.row_ptr;
    a.col = adj.cols;
    a.w.resize(adj.coeffs.size());
    for (std::size_t k = 0; k < adj.coeffs.size(); ++k)
      a.w[k] = static_cast<S>(adj.coeffs[k]);
    return a;
  }

  // Same structure, uniform 1/|N(i)| weights (self-loop included).
  static CsrAdj mean_from(const NormAdj& adj) {
    CsrAdj a = from(adj);
    for (int i = 0; i < a.n; ++i) {
      const S inv = static_cast<S>(1) / static_cast<S>(a.row_ptr[i + 1] - a.row_ptr[i]);
      for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) a.w[k] = inv;
    }
    return a;
  }

  // Structure only.
  static CsrAdj structure_from(const NormAdj& adj) {
    CsrAdj a = from(adj);
    a.w.clear();
    return a;
  }
};

struct Value {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Reverse-mode tape over dense matrices. A tape records one forward pass;
// backward() walks it once and scatters parameter gradients into their
// stores. Ops are free functions so expressions compose naturally.
template <class S>
class Tape {
 public:
  using M = Mat<S>;

  Value input(M v) {
    Node n;
    n.owned = std::move(v);
    return push(std::move(n));
  }

  // Non-owning constant; the caller keeps `v` alive for the tape's lifetime.
  Value input_ref(const M* v) {
    Node n;
    n.view = v;
    return push(std::move(n));
  }

  // Leaf bound to a named parameter. Repeated requests for the same parameter
  // return the same node so gradient contributions accumulate.
  Value param(ParamStore<S>& store, const std::string& name) {
    auto key = std::make_pair(&store, name);
    auto it = param_nodes_.find(key);
    if (it != param_nodes_.end()) return Value{it->second};
    Node n;
    n.view = &store.at(name).value;
    n.store = &store;
    n.pname = name;
    n.needs_grad = true;
    Value v = push(std::move(n));
    param_nodes_.emplace(key, v.idx);
    stores_.insert(&store);
    return v;
  }

  const M& value(Value v) const { return node(v).val(); }

  const M& grad(Value v) const {
    const Node& n = node(v);
    if (!ran_backward_) throw StateError("grad read before backward");
    return n.grad;
  }

  bool needs_grad(Value v) const { return node(v).needs_grad; }

  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable leaf.
  // Unreachable parameters end up with exactly zero gradients.
  void backward(Value loss) {
    const Node& ln = node(loss);
    if (ln.val().rows() != 1 || ln.val().cols() != 1)
      throw StateError("backward: loss must be 1x1");
    for (ParamStore<S>* s : stores_) s->zero_grads();
    ensure_grad(loss.idx);
    nodes_[loss.idx].grad(0, 0) = static_cast<S>(1);
    for (int i = loss.idx; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0) continue;  // not on the loss path
      if (n.pull) n.pull(*this, n.grad);
      if (n.store) n.store->at(n.pname).grad = n.grad;
    }
    for (ParamStore<S>* s : stores_) s->grads_ready = true;
    ran_backward_ = true;
  }

  void clear() {
    nodes_.clear();
    param_nodes_.clear();
    stores_.clear();
    ran_backward_ = false;
  }

  // --- used by op implementations ---

  struct Node {
    M owned;
    const M* view = nullptr;
    M grad;
    bool needs_grad = false;
    ParamStore<S>* store = nullptr;
    std::string pname;
    std::function<void(Tape&, const M&)> pull;

    const M& val() const { return view ? *view : owned; }
  };

  Value push(Node n) {
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size()) - 1};
  }

  const Node& node(Value v) const {
    if (!v.valid() || v.idx >= static_cast<int>(nodes_.size()))
      throw StateError("invalid tape value");
    return nodes_[v.idx];
  }

  // Accumulates `g` into the gradient slot of node `idx`.
  void accumulate(int idx, const M& g) {
    ensure_grad(idx);
    nodes_[idx].grad += g;
  }

  M& grad_slot(int idx) {
    ensure_grad(idx);
    return nodes_[idx].grad;
  }

  // For ops whose backward needs the output node's own id.
  void set_pull(Value v, std::function<void(Tape&, const M&)> fn) {
    nodes_[v.idx].pull = std::move(fn);
  }

 private:
  void ensure_grad(int idx) {
    Node& n = nodes_[idx];
    if (n.grad.size() == 0) n.grad = M::Zero(n.val().rows(), n.val().cols());
  }

  std::vector<Node> nodes_;
  std::map<std::pair<ParamStore<S>*, std::string>, int> param_nodes_;
  std::set<ParamStore<S>*> stores_;
  bool ran_backward_ = false;
};

namespace detail {

template <class S>
Value unary_op(Tape<S>& t, Value x, Mat<S> out,
               std::function<void(Tape<S>&, const Mat<S>&)> pull, bool child_grad) {
  typename Tape<S>::Node n;
  n.owned = std::move(out);
  n.needs_grad = child_grad;
  if (child_grad) n.pull = std::move(pull);
  return t.push(std::move(n));
}

template <class S>
void check_same_shape(const Mat<S>& a, const Mat<S>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": operand shapes differ");
}

}  // namespace detail

// ---------- linear algebra ----------

template <class S>
Value matmul(Tape<S>& t, Value a, Value b) {
  const Mat<S>& A = t.value(a);
  const Mat<S>& B = t.value(b);
  if (A.cols() != B.rows()) throw ShapeError("matmul: inner dimensions disagree");
  const bool ga = t.needs_grad(a), gb = t.needs_grad(b);
  typename Tape<S>::Node n;
  n.owned = A * B;
  n.needs_grad = ga || gb;
  if (n.needs_grad) {
    n.pull = [a, b, ga, gb](Tape<S>& tp, const Mat<S>& G) {
      if (ga) tp.accumulate(a.idx, G * tp.value(b).transpose());
      if (gb) tp.accumulate(b.idx, tp.value(a).transpose() * G);
    };
  }
  return t.push(std::move(n));
}

// out.row(i) = sum_k w_k h.row(col_k) over row i's stored entries.
template <class S>
Value spmm(Tape<S>& t, const CsrAdj<S>& adj, Value h) {
  const Mat<S>& H = t.value(h);
  if (H.rows() != adj.n) throw ShapeError("spmm: adjacency size != h rows");
  if (adj.w.empty()) throw ArgumentError("spmm: operator has no coefficients");
  Mat<S> out = Mat<S>::Zero(adj.n, H.cols());
  for (int i = 0; i < adj.n; ++i)
    for (int k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k)
      out.row(i) += adj.w[k] * H.row(adj.col[k]);
  const bool gh = t.needs_grad(h);
  typename Tape<S>::Node n;
  n.owned = std::move(out);
  n.needs_grad = gh;
  if (gh) {
    n.pull = [h, &adj](Tape<S>& tp, const Mat<S>& G) {
      Mat<S>& gh_slot = tp.grad_slot(h.idx);
      for (int i = 0; i < adj.n; ++i)
        for (int k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k)
          gh_slot.row(adj.col[k]) += adj.w[k] * G.row(i);
    };
  }
  return t.push(std::move(n));
}

template <class S>
Value add(Tape<S>& t, Value a, Value b) {
  const Mat<S>& A = t.value(a);
  const Mat<S>& B = t.value(b);
  detail::check_same_shape(A, B, "add");
  const bool ga = t.needs_grad(a), gb = t.needs_grad(b);
  typename Tape<S>::Node n;
  n.owned = A + B;
  n.needs_grad = ga || gb;
  if (n.needs_grad) {
    n.pull = [a, b, ga, gb](Tape<S>& tp, const Mat<S>& G) {
      if (ga) tp.accumulate(a.idx, G);
      if (gb) tp.accumulate(b.idx, G);
    };
  }
  return t.push(std::move(n));
}

// ca * a + cb * b with constant coefficients.
template <class S>
Value add_scaled(Tape<S>& t, Value a, S ca, Value b, S cb) {
  const Mat<S>& A = t.value(a);
  const Mat<S>& B = t.value(b);
  detail::check_same_shape(A, B, "add_scaled");
  const bool ga = t.needs_grad(a), gb = t.needs_grad(b);
  typename Tape<S>::Node n;
  n.owned = ca * A + cb * B;
  n.needs_grad = ga || gb;
  if (n.needs_grad) {
    n.pull = [a, b, ca, cb, ga, gb](Tape<S>& tp, const Mat<S>& G) {
      if (ga) tp.accumulate(a.idx, ca * G);
      if (gb) tp.accumulate(b.idx, cb * G);
    };
  }
  return t.push(std::move(n));
}

template <class S>
Value scale(Tape<S>& t, Value a, S c) {
  const bool ga = t.needs_grad(a);
  return detail::unary_op<S>(
      t, a, c * t.value(a),
      [a, c](Tape<S>& tp, const Mat<S>& G) { tp.accumulate(a.idx, c * G); }, ga);
}

template <class S>
Value hadamard(Tape<S>& t, Value a, Value b) {
  const Mat<S>& A = t.value(a);
  const Mat<S>& B = t.value(b);
  detail::check_same_shape(A, B, "hadamard");
  const bool ga = t.needs_grad(a), gb = t.needs_grad(b);
  typename Tape<S>::Node n;
  n.owned = A.cwiseProduct(B);
  n.needs_grad = ga || gb;
  if (n.needs_grad) {
    n.pull = [a, b, ga, gb](Tape<S>& tp, const Mat<S>& G) {
      if (ga) tp.accumulate(a.idx, G.cwiseProduct(tp.value(b)));
      if (gb) tp.accumulate(b.idx, G.cwiseProduct(tp.value(a)));
    };
  }
  return t.push(std::move(n));
}

// x + bias broadcast over rows; bias is 1 x cols.
template <class S>
Value add_row_bias(Tape<S>& t, Value x, Value bias) {
  const Mat<S>& X = t.value(x);
  const Mat<S>& B = t.value(bias);
  if (B.rows() != 1 || B.cols() != X.cols())
    throw ShapeError("add_row_bias: bias must be 1 x cols(x)");
  const bool gx = t.needs_grad(x), gb = t.needs_grad(bias);
  typename Tape<S>::Node n;
  n.owned = X.rowwise() + B.row(0);
  n.needs_grad = gx || gb;
  if (n.needs_grad) {
    n.pull = [x, bias, gx, gb](Tape<S>& tp, const Mat<S>& G) {
      if (gx) tp.accumulate(x.idx, G);
      if (gb) tp.accumulate(bias.idx, G.colwise().sum());
    };
  }
  return t.push(std::move(n));
}

// ---------- elementwise nonlinearities ----------

template <class S>
Value relu(Tape<S>& t, Value x) {
  const Mat<S>& X = t.value(x);
  return detail::unary_op<S>(
      t, x, X.cwiseMax(static_cast<S>(0)),
      [x](Tape<S>& tp, const Mat<S>& G) {
        tp.accumulate(x.idx,
                      (tp.value(x).array() > 0).template cast<S>().matrix().cwiseProduct(G));
      },
      t.needs_grad(x));
}

template <class S>
Value elu(Tape<S>& t, Value x) {
  const Mat<S>& X = t.value(x);
  Mat<S> out = X.unaryExpr([](S v) {
    return v > 0 ? v : static_cast<S>(std::expm1(static_cast<double>(v)));
  });
  return detail::unary_op<S>(
      t, x, std::move(out),
      [x](Tape<S>& tp, const Mat<S>& G) {
        const Mat<S>& X2 = tp.value(x);
        Mat<S> d = X2.unaryExpr([](S v) {
          return v > 0 ? static_cast<S>(1)
                       : static_cast<S>(std::exp(static_cast<double>(v)));
        });
        tp.accumulate(x.idx, d.cwiseProduct(G));
      },
      t.needs_grad(x));
}

template <class S>
Value tanh_act(Tape<S>& t, Value x) {
  typename Tape<S>::Node n;
  n.owned = t.value(x).array().tanh().matrix();
  n.needs_grad = t.needs_grad(x);
  Value out = t.push(std::move(n));
  if (t.needs_grad(x)) {
    // derivative 1 - tanh^2, read from this node's stored value
    t.set_pull(out, [x, out](Tape<S>& tp, const Mat<S>& G) {
      const Mat<S>& Y = tp.value(out);
      tp.accumulate(x.idx,
                    ((static_cast<S>(1) - Y.array().square()).matrix()).cwiseProduct(G));
    });
  }
  return out;
}

template <class S>
Value leaky_relu(Tape<S>& t, Value x, S slope) {
  const Mat<S>& X = t.value(x);
  Mat<S> out = X.unaryExpr([slope](S v) { return v > 0 ? v : slope * v; });
  return detail::unary_op<S>(
      t, x, std::move(out),
      [x, slope](Tape<S>& tp, const Mat<S>& G) {
        const Mat<S>& X2 = tp.value(x);
        Mat<S> d = X2.unaryExpr([slope](S v) { return v > 0 ? static_cast<S>(1) : slope; });
        tp.accumulate(x.idx, d.cwiseProduct(G));
      },
      t.needs_grad(x));
}

// PReLU with a learnable 1x1 slope.
template <class S>
Value prelu(Tape<S>& t, Value x, Value slope) {
  const Mat<S>& X = t.value(x);
  const Mat<S>& A = t.value(slope);
  if (A.rows() != 1 || A.cols() != 1) throw ShapeError("prelu: slope must be 1x1");
  const S s = A(0, 0);
  Mat<S> out = X.unaryExpr([s](S v) { return v > 0 ? v : s * v; });
  const bool gx = t.needs_grad(x), gs = t.needs_grad(slope);
  typename Tape<S>::Node n;
  n.owned = std::move(out);
  n.needs_grad = gx || gs;
  if (n.needs_grad) {
    n.pull = [x, slope, gx, gs](Tape<S>& tp, const Mat<S>& G) {
      const Mat<S>& X2 = tp.value(x);
      const S s2 = tp.value(slope)(0, 0);
      if (gx) {
        Mat<S> d = X2.unaryExpr([s2](S v) { return v > 0 ? static_cast<S>(1) : s2; });
        tp.accumulate(x.idx, d.cwiseProduct(G));
      }
      if (gs) {
        S acc = 0;
        for (int i = 0; i < X2.rows(); ++i)
          for (int j = 0; j < X2.cols(); ++j)
            if (X2(i, j) <= 0) acc += X2(i, j) * G(i, j);
        Mat<S> gm(1, 1);
        gm(0, 0) = acc;
        tp.accumulate(slope.idx, gm);
      }
    };
  }
  return t.push(std::move(n));
}

// Applies the configured activation; PReLU requires its slope parameter.
template <class S>
Value activation(Tape<S>& t, Activation kind, Value x, Value prelu_slope = Value{}) {
  switch (kind) {
    case Activation::ReLU: return relu(t, x);
    case Activation::ELU: return elu(t, x);
    case Activation::PReLU:
      if (!prelu_slope.valid()) throw StateError("prelu activation needs a slope parameter");
      return prelu(t, x, prelu_slope);
    case Activation::Tanh: return tanh_act(t, x);
    case Activation::Identity:
    case Activation::None: return x;
  }
  throw Error("activation: unknown kind");
}

// ---------- softmax and losses ----------

template <class S>
Value row_softmax(Tape<S>& t, Value x) {
  const Mat<S>& X = t.value(x);
  Mat<S> out(X.rows(), X.cols());
  for (int i = 0; i < X.rows(); ++i) {
    const S mx = X.row(i).maxCoeff();
    Eigen::Array<S, 1, Eigen::Dynamic> e = (X.row(i).array() - mx).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  typename Tape<S>::Node n;
  n.owned = std::move(out);
  n.needs_grad = t.needs_grad(x);
  Value v = t.push(std::move(n));
  if (t.needs_grad(x)) {
    t.set_pull(v, [x, v](Tape<S>& tp, const Mat<S>& G) {
      const Mat<S>& P = tp.value(v);
      Mat<S> gx(P.rows(), P.cols());
      for (int i = 0; i < P.rows(); ++i) {
        const S dot = P.row(i).dot(G.row(i));
        gx.row(i) = P.row(i).cwiseProduct(G.row(i) - Mat<S>::Constant(1, P.cols(), dot));
      }
      tp.accumulate(x.idx, gx);
    });
  }
  return v;
}

// Mean negative log-likelihood over mask-selected rows; log-sum-exp shifted.
template <class S>
Value masked_cross_entropy(Tape<S>& t, Value logits, Eigen::VectorXi labels,
                           std::vector<int> rows) {
  const Mat<S>& X = t.value(logits);
  if (labels.size() != X.rows()) throw ShapeError("masked_cross_entropy: label count");
  if (rows.empty()) throw ArgumentError("masked_cross_entropy: empty mask");
  double loss = 0.0;
  for (int i : rows) {
    const S mx = X.row(i).maxCoeff();
    double lse = 0.0;
    for (int j = 0; j < X.cols(); ++j)
      lse += std::exp(static_cast<double>(X(i, j) - mx));
    loss += std::log(lse) + static_cast<double>(mx) - static_cast<double>(X(i, labels[i]));
  }
  loss /= static_cast<double>(rows.size());
  Mat<S> out(1, 1);
  out(0, 0) = static_cast<S>(loss);
  typename Tape<S>::Node n;
  n.owned = std::move(out);
  n.needs_grad = t.needs_grad(logits);
  if (n.needs_grad) {
    n.pull = [logits, labels = std::move(labels),
              rows = std::move(rows)](Tape<S>& tp, const Mat<S>& G) {
      const Mat<S>& X2 = tp.value(logits);
      Mat<S> gx = Mat<S>::Zero(X2.rows(), X2.cols());
      const S scale = G(0, 0) / static_cast<S>(rows.size());
      for (int i : rows) {
        const S mx = X2.row(i).maxCoeff();
        Eigen::Array<S, 1, Eigen::Dynamic> e = (X2.row(i).array() - mx).exp();
        Eigen::Array<S, 1, Eigen::Dynamic> p = e / e.sum();
        gx.row(i) = (p * scale).matrix();
        gx(i, labels[i]) -= scale;
      }
      tp.accumulate(logits.idx, gx);
    };
  }
  return t.push(std::move(n));
}

// ---------- dropout ----------

// Inverted dropout: survivors scale by 1/(1-rate) during training; identity
// (and no RNG consumption) when evaluating.
template <class S>
Value dropout(Tape<S>& t, Value x, S rate, bool training, Rng& rng) {
  if (rate < static_cast<S>(0) || rate >= static_cast<S>(1))
    throw ArgumentError("dropout: rate must lie in [0,1)");
  if (!training || rate == static_cast<S>(0)) return x;
  const Mat<S>& X = t.value(x);
  const double keep = 1.0 - static_cast<double>(rate);
  const S inv = static_cast<S>(1.0 / keep);
  Mat<S> mask(X.rows(), X.cols());
  for (int i = 0; i < X.rows(); ++i)
    for (int j = 0; j < X.cols(); ++j)
      mask(i, j) = rng.uniform() < keep ? inv : static_cast<S>(0);
  Value m = t.input(std::move(mask));
  return hadamard(t, x, m);
}

// ---------- graph attention / aggregation primitives ----------

// Per-edge logits e_k = target_score[row_k] + source_score[col_k], as nnz x 1.
template <class S>
Value edge_logits(Tape<S>& t, const CsrAdj<S>& adj, Value target_score, Value source_score) {
  const Mat<S>& U = t.value(target_score);
  const Mat<S>& V = t.value(source_score);
  if (U.rows() != adj.n || U.cols() != 1 || V.rows() != adj.n || V.cols() != 1)
    throw ShapeError("edge_logits: scores must be n x 1");
  Mat<S> out(adj.nnz(), 1);
  for (int i = 0; i < adj.n; ++i)
    for (int k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k)
      out(k, 0) = U(i, 0) + V(adj.col[k], 0);
  const bool gu = t.needs_grad(target_score), gv = t.needs_grad(source_score);
  typename Tape<S>::Node n;
  n.owned = std::move(out);
  n.needs_grad = gu || gv;
  if (n.needs_grad) {
    n.pull = [target_score, source_score, &adj, gu, gv](Tape<S>& tp, const Mat<S>& G) {
      if (gu) {
        Mat<S>& gslot = tp.grad_slot(target_score.idx);
        for (int i = 0; i < adj.n; ++i)
          for (int k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k) gslot(i, 0) += G(k, 0);
      }
      if (gv) {
        Mat<S>& gslot = tp.grad_slot(source_score.idx);
        for (int i = 0; i < adj.n; ++i)
          for (int k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k)
            gslot(adj.col[k], 0) += G(k, 0);
      }
    };
  }
  return t.push(std::move(n));
}

// Softmax over each target node's incoming edges (max-shifted).
template <class S>
Value segment_softmax(Tape<S>& t, const CsrAdj<S>& adj, Value edge_vals) {
  const Mat<S>& E = t.value(edge_vals);
  if (E.rows() != adj.nnz() || E.cols() != 1)
    throw ShapeError("segment_softmax: expected nnz x 1");
  Mat<S> out(adj.nnz(), 1);
  for (int i = 0; i < adj.n; ++i) {
    const int lo = adj.row_ptr[i], hi = adj.row_ptr[i + 1];
    if (lo == hi) continue;
    S mx = E(lo, 0);
    for (int k = lo + 1; k < hi; ++k) mx = std::max(mx, E(k, 0));
    S sum = 0;
    for (int k = lo; k < hi; ++k) {
      out(k, 0) = static_cast<S>(std::exp(static_cast<double>(E(k, 0) - mx)));
      sum += out(k, 0);
    }
    for (int k = lo; k < hi; ++k) out(k, 0) /= sum;
  }
  typename Tape<S>::Node n;
  n.owned = std::move(out);
  n.needs_grad = t.needs_grad(edge_vals);
  Value v = t.push(std::move(n));
  if (t.needs_grad(edge_vals)) {
    t.set_pull(v, [edge_vals, v, &adj](Tape<S>& tp, const Mat<S>& G) {
      const Mat<S>& W = tp.value(v);
      Mat<S> ge = Mat<S>::Zero(W.rows(), 1);
      for (int i = 0; i < adj.n; ++i) {
        const int lo = adj.row_ptr[i], hi = adj.row_ptr[i + 1];
        S dot = 0;
        for (int k = lo; k < hi; ++k) dot += W(k, 0) * G(k, 0);
        for (int k = lo; k < hi; ++k) ge(k, 0) = W(k, 0) * (G(k, 0) - dot);
      }
      tp.accumulate(edge_vals.idx, ge);
    });
  }
  return v;
}

// out.row(i) = sum_k weights_k h.row(col_k); weights are tape values.
template <class S>
Value weighted_spmm(Tape<S>& t, const CsrAdj<S>& adj, Value weights, Value h) {
  const Mat<S>& W = t.value(weights);
  const Mat<S>& H = t.value(h);
  if (W.rows() != adj.nnz() || W.cols() != 1)
    throw ShapeError("weighted_spmm: weights must be nnz x 1");
  if (H.rows() != adj.n) throw ShapeError("weighted_spmm: h rows != n");
  Mat<S> out = Mat<S>::Zero(adj.n, H.cols());
  for (int i = 0; i < adj.n; ++i)
    for (int k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k)
      out.row(i) += W(k, 0) * H.row(adj.col[k]);
  const bool gw = t.needs_grad(weights), gh = t.needs_grad(h);
  typename Tape<S>::Node n;
  n.owned = std::move(out);
  n.needs_grad = gw || gh;
  if (n.needs_grad) {
    n.pull = [weights, h, &adj, gw, gh](Tape<S>& tp, const Mat<S>& G) {
      const Mat<S>& W2 = tp.value(weights);
      const Mat<S>& H2 = tp.value(h);
      if (gw) {
        Mat<S>& gws = tp.grad_slot(weights.idx);
        for (int i = 0; i < adj.n; ++i)
          for (int k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k)
            gws(k, 0) += G.row(i).dot(H2.row(adj.col[k]));
      }
      if (gh) {
        Mat<S>& ghs = tp.grad_slot(h.idx);
        for (int i = 0; i < adj.n; ++i)
          for (int k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k)
            ghs.row(adj.col[k]) += W2(k, 0) * G.row(i);
      }
    };
  }
  return t.push(std::move(n));
}

// Per-edge cosine similarity of endpoint embeddings, nnz x 1. Norms carry a
// small epsilon so zero rows stay differentiable.
template <class S>
Value edge_cosine(Tape<S>& t, const CsrAdj<S>& adj, Value h) {
  const Mat<S>& H = t.value(h);
  if (H.rows() != adj.n) throw ShapeError("edge_cosine: h rows != n");
  constexpr double kEps = 1e-8;
  Eigen::Array<S, Eigen::Dynamic, 1> norms(adj.n);
  for (int i = 0; i < adj.n; ++i)
    norms(i) = static_cast<S>(
        std::sqrt(static_cast<double>(H.row(i).squaredNorm()) + kEps));
  Mat<S> out(adj.nnz(), 1);
  for (int i = 0; i < adj.n; ++i)
    for (int k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k)
      out(k, 0) = H.row(i).dot(H.row(adj.col[k])) / (norms(i) * norms(adj.col[k]));
  typename Tape<S>::Node n;
  n.owned = std::move(out);
  n.needs_grad = t.needs_grad(h);
  Value v = t.push(std::move(n));
  if (t.needs_grad(h)) {
    t.set_pull(v, [h, v, &adj](Tape<S>& tp, const Mat<S>& G) {
      const Mat<S>& H2 = tp.value(h);
      const Mat<S>& C = tp.value(v);
      Eigen::Array<S, Eigen::Dynamic, 1> norms(adj.n);
      for (int i = 0; i < adj.n; ++i)
        norms(i) = static_cast<S>(
            std::sqrt(static_cast<double>(H2.row(i).squaredNorm()) + kEps));
      Mat<S>& gh = tp.grad_slot(h.idx);
      for (int i = 0; i < adj.n; ++i) {
        for (int k = adj.row_ptr[i]; k < adj.row_ptr[i + 1]; ++k) {
          const int j = adj.col[k];
          const S g = G(k, 0);
          if (g == static_cast<S>(0)) continue;
          const S c = C(k, 0);
          // d c / d u = v/(|u||v|) - c u/|u|^2 ; symmetric for v
          gh.row(i) += g * (H2.row(j) / (norms(i) * norms(j)) -
                            c * H2.row(i) / (norms(i) * norms(i)));
          gh.row(j) += g * (H2.row(i) / (norms(i) * norms(j)) -
                            c * H2.row(j) / (norms(j) * norms(j)));
        }
      }
    });
  }
  return v;
}

// Elementwise max over each target's neighborhood; gradient routes to the
// first maximizing neighbor per (node, channel).
template <class S>
Value neighbor_max(Tape<S>& t, const CsrAdj<S>& adj, Value h) {
  const Mat<S>& H = t.value(h);
  if (H.rows() != adj.n) throw ShapeError("neighbor_max: h rows != n");
  Mat<S> out(adj.n, H.cols());
  Eigen::MatrixXi arg(adj.n, H.cols());
  for (int i = 0; i < adj.n; ++i) {
    const int lo = adj.row_ptr[i], hi = adj.row_ptr[i + 1];
    if (lo == hi) throw StateError("neighbor_max: empty neighborhood (missing self-loop)");
    for (int c = 0; c < H.cols(); ++c) {
      S best = H(adj.col[lo], c);
      int bk = lo;
      for (int k = lo + 1; k < hi; ++k) {
        if (H(adj.col[k], c) > best) {
          best = H(adj.col[k], c);
          bk = k;
        }
      }
      out(i, c) = best;
      arg(i, c) = adj.col[bk];
    }
  }
  typename Tape<S>::Node n;
  n.owned = std::move(out);
  n.needs_grad = t.needs_grad(h);
  if (n.needs_grad) {
    n.pull = [h, arg](Tape<S>& tp, const Mat<S>& G) {
      Mat<S>& gh = tp.grad_slot(h.idx);
      for (int i = 0; i < G.rows(); ++i)
        for (int c = 0; c < G.cols(); ++c) gh(arg(i, c), c) += G(i, c);
    };
  }
  return t.push(std::move(n));
}

// Multiplies by a learnable 1x1 scalar.
template <class S>
Value scale_by_param(Tape<S>& t, Value x, Value s) {
  const Mat<S>& A = t.value(s);
  if (A.rows() != 1 || A.cols() != 1) throw ShapeError("scale_by_param: s must be 1x1");
  const bool gx = t.needs_grad(x), gs = t.needs_grad(s);
  typename Tape<S>::Node n;
  n.owned = A(0, 0) * t.value(x);
  n.needs_grad = gx || gs;
  if (n.needs_grad) {
    n.pull = [x, s, gx, gs](Tape<S>& tp, const Mat<S>& G) {
      if (gx) tp.accumulate(x.idx, tp.value(s)(0, 0) * G);
      if (gs) {
        Mat<S> gm(1, 1);
        gm(0, 0) = G.cwiseProduct(tp.value(x)).sum();
        tp.accumulate(s.idx, gm);
      }
    };
  }
  return t.push(std::move(n));
}

// ---------- reductions and batch helpers ----------

template <class S>
Value sum_all(Tape<S>& t, Value x) {
  Mat<S> out(1, 1);
  out(0, 0) = t.value(x).sum();
  return detail::unary_op<S>(
      t, x, std::move(out),
      [x](Tape<S>& tp, const Mat<S>& G) {
        const Mat<S>& X = tp.value(x);
        tp.accumulate(x.idx, Mat<S>::Constant(X.rows(), X.cols(), G(0, 0)));
      },
      t.needs_grad(x));
}

// Picks entries (row_k, col_k) into a k x 1 vector.
template <class S>
Value gather(Tape<S>& t, Value x, const std::vector<std::pair<int, int>>& at) {
  const Mat<S>& X = t.value(x);
  Mat<S> out(static_cast<int>(at.size()), 1);
  for (std::size_t k = 0; k < at.size(); ++k) {
    const auto& [r, c] = at[k];
    if (r < 0 || c < 0 || r >= X.rows() || c >= X.cols())
      throw ShapeError("gather: index out of range");
    out(static_cast<int>(k), 0) = X(r, c);
  }
  return detail::unary_op<S>(
      t, x, std::move(out),
      [x, at](Tape<S>& tp, const Mat<S>& G) {
        Mat<S>& gx = tp.grad_slot(x.idx);
        for (std::size_t k = 0; k < at.size(); ++k)
          gx(at[k].first, at[k].second) += G(static_cast<int>(k), 0);
      },
      t.needs_grad(x));
}

// Mean squared error against a constant target of the same shape.
template <class S>
Value mse_to_const(Tape<S>& t, Value pred, Mat<S> target) {
  const Mat<S>& P = t.value(pred);
  detail::check_same_shape<S>(P, target, "mse_to_const");
  Mat<S> out(1, 1);
  out(0, 0) = (P - target).squaredNorm() / static_cast<S>(P.size());
  const auto tgt = std::make_shared<Mat<S>>(std::move(target));
  return detail::unary_op<S>(
      t, pred, std::move(out),
      [pred, tgt](Tape<S>& tp, const Mat<S>& G) {
        const Mat<S>& P2 = tp.value(pred);
        tp.accumulate(pred.idx, (static_cast<S>(2) / static_cast<S>(P2.size())) *
                                    G(0, 0) * (P2 - *tgt));
      },
      t.needs_grad(pred));
}

template <class S>
bool all_finite(const Mat<S>& m) {
  return m.allFinite();
}

}  // namespace gnas
