#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <string>

#include "gnas/errors.hpp"
#include "gnas/rng.hpp"

namespace gnas {

// Row-major: embeddings are accessed node-row-wise throughout.
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Named parameters with gradient and Adam moment slots. A store belongs to
// one evaluation at a time; independent evaluations use independent stores.
template <class S>
struct ParamStore {
  struct Entry {
    Mat<S> value, grad, m1, m2;
    std::string group = "none";  // weight-decay group
  };

  std::map<std::string, Entry> entries;  // ordered; iteration is deterministic
  long step = 0;
  bool grads_ready = false;

  Mat<S>& create(const std::string& name, int rows, int cols,
                 const std::string& group) {
    if (entries.count(name)) throw StateError("parameter already exists: " + name);
    Entry e;
    e.value = Mat<S>::Zero(rows, cols);
    e.grad = Mat<S>::Zero(rows, cols);
    e.m1 = Mat<S>::Zero(rows, cols);
    e.m2 = Mat<S>::Zero(rows, cols);
    e.group = group;
    return entries.emplace(name, std::move(e)).first->second.value;
  }

  Entry& at(const std::string& name) {
    auto it = entries.find(name);
    if (it == entries.end()) throw StateError("unknown parameter: " + name);
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw StateError("unknown parameter: " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return entries.count(name) != 0; }

  void zero_grads() {
    for (auto& [name, e] : entries) e.grad.setZero();
  }
};

// Glorot-uniform fill; draws row-major for a platform-stable sequence.
template <class S>
void glorot_init(Mat<S>& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (int i = 0; i < w.rows(); ++i)
    for (int j = 0; j < w.cols(); ++j)
      w(i, j) = static_cast<S>((2.0 * rng.uniform() - 1.0) * limit);
}

template <class S>
void fill_constant(Mat<S>& w, S v) {
  w.setConstant(v);
}

// Copies parameter values (not optimizer state); shapes must already match.
template <class S>
void copy_params(ParamStore<S>& dst, const ParamStore<S>& src) {
  for (const auto& [name, e] : src.entries) {
    auto it = dst.entries.find(name);
    if (it == dst.entries.end()) throw StateError("copy_params: missing " + name);
    if (it->second.value.rows() != e.value.rows() ||
        it->second.value.cols() != e.value.cols())
      throw ShapeError("copy_params: shape mismatch for " + name);
    it->second.value = e.value;
  }
}

// One Adam step with decoupled per-group weight decay:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd(group) p)
// Groups absent from the map decay with rate 0.
template <class S>
void adam_step(ParamStore<S>& store, S lr,
               const std::map<std::string, S>& group_weight_decay,
               S beta1 = static_cast<S>(0.9), S beta2 = static_cast<S>(0.999),
               S eps = static_cast<S>(1e-8)) {
  if (!store.grads_ready)
    throw StateError("adam_step: gradients not populated (run backward first)");
  store.step += 1;
  const S bc1 = static_cast<S>(1) - static_cast<S>(std::pow(static_cast<double>(beta1),
                                                            static_cast<double>(store.step)));
  const S bc2 = static_cast<S>(1) - static_cast<S>(std::pow(static_cast<double>(beta2),
                                                            static_cast<double>(store.step)));
  for (auto& [name, e] : store.entries) {
    e.m1 = beta1 * e.m1 + (static_cast<S>(1) - beta1) * e.grad;
    e.m2 = beta2 * e.m2 + (static_cast<S>(1) - beta2) * e.grad.cwiseProduct(e.grad);
    S wd = static_cast<S>(0);
    auto it = group_weight_decay.find(e.group);
    if (it != group_weight_decay.end()) wd = it->second;
    e.value.array() -= lr * ((e.m1.array() / bc1) / ((e.m2.array() / bc2).sqrt() + eps) +
                             wd * e.value.array());
  }
  store.grads_ready = false;
}

}  // namespace gnas
