#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "gnas/engine.hpp"

namespace gnas::test {

// Central finite differences against the analytic tape gradients.
// `eval(with_grad)` rebuilds the forward pass from the store's current
// values, returns the loss, and populates store gradients when asked.
struct GradCheck {
  double max_err = 0.0;
  std::string worst;
};

inline GradCheck grad_check(ParamStore<double>& store,
                            const std::function<double(bool)>& eval, double h = 1e-5) {
  GradCheck out;
  eval(true);
  std::map<std::string, Mat<double>> analytic;
  for (auto& [name, e] : store.entries) analytic[name] = e.grad;
  for (auto& [name, e] : store.entries) {
    for (int i = 0; i < e.value.rows(); ++i) {
      for (int j = 0; j < e.value.cols(); ++j) {
        const double keep = e.value(i, j);
        e.value(i, j) = keep + h;
        const double up = eval(false);
        e.value(i, j) = keep - h;
        const double dn = eval(false);
        e.value(i, j) = keep;
        const double numeric = (up - dn) / (2.0 * h);
        const double exact = analytic[name](i, j);
        const double err =
            std::abs(numeric - exact) / std::max({1.0, std::abs(numeric), std::abs(exact)});
        if (err > out.max_err) {
          out.max_err = err;
          out.worst = name + "(" + std::to_string(i) + "," + std::to_string(j) + ")";
        }
      }
    }
  }
  return out;
}

// Small deterministic graph: ring of n nodes plus a chord, random features.
inline Graph tiny_graph(int n, int feat_dim, int classes, std::uint64_t seed) {
  Graph g;
  g.num_nodes = n;
  g.num_classes = classes;
  Rng rng(seed);
  g.features.resize(n, feat_dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < feat_dim; ++j) g.features(i, j) = rng.normal() * 0.5 + 0.6;
  g.labels.resize(n);
  for (int i = 0; i < n; ++i) g.labels[i] = i % classes;
  for (int i = 0; i < n; ++i) g.edges.push_back({std::min(i, (i + 1) % n),
                                                 std::max(i, (i + 1) % n)});
  if (n > 4) g.edges.push_back({0, n / 2});
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  g.num_edges = static_cast<int>(g.edges.size());
  validate_graph(g);
  return g;
}

// All-nodes masks split 50/25/25 round-robin.
inline SplitMasks tiny_masks(int n) {
  SplitMasks m;
  m.train = Mask::Constant(n, false);
  m.val = Mask::Constant(n, false);
  m.test = Mask::Constant(n, false);
  for (int i = 0; i < n; ++i) {
    if (i % 4 <= 1)
      m.train[i] = true;
    else if (i % 4 == 2)
      m.val[i] = true;
    else
      m.test[i] = true;
  }
  return m;
}

inline std::string temp_dir(const std::string& tag) {
  const std::string dir =
      (std::filesystem::temp_directory_path() / ("gnas_" + tag)).string();
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  out << content;
}

// Densifies a CSR operator for oracle comparisons.
template <class S>
Mat<S> densify(const CsrAdj<S>& a) {
  Mat<S> m = Mat<S>::Zero(a.n, a.n);
  for (int i = 0; i < a.n; ++i)
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) m(i, a.col[k]) += a.w[k];
  return m;
}

}  // namespace gnas::test
