#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "gnas/graph.hpp"
#include "gnas/model.hpp"
#include "gnas/mlp.hpp"
#include "gnas/tape.hpp"

namespace gnas {

struct HyperParams {
  double alpha = 0.3;    // initial-residual weight, overridden per block
  double lambda = 0.5;   // identity-mapping strength; 0 switches the transform off
  double dropout = 0.3;  // input dropout; per-block rates come from the code
  int hidden = 32;
  double lr = 0.01;
  int epochs = 400;
  double weight_decay_conv = 0.01;
  double weight_decay_fc = 4e-5;
};

struct EvaluationResult {
  double val_accuracy = 0.0;   // at the best validation epoch
  double test_accuracy = 0.0;  // at the same epoch
  double final_train_loss = 0.0;
  int epochs_run = 0;
  int best_epoch = 0;
  double wall_time_s = 0.0;
  bool failed = false;  // non-finite loss or attention blow-up
};

// Identity-mapping schedule: beta_l = ln(lambda / l + 1), decaying toward the
// identity transform with depth.
template <class S>
S beta_at_depth(int l, S lambda) {
  if (l < 1) throw ArgumentError("beta_at_depth: depth starts at 1");
  if (lambda < static_cast<S>(0)) throw ArgumentError("beta_at_depth: lambda must be >= 0");
  return static_cast<S>(std::log1p(static_cast<double>(lambda) / l));
}

// Dataset operands shared (immutably) by every evaluation on one graph.
template <class S>
struct GraphTensors {
  Mat<S> features;
  CsrAdj<S> gcn;        // symmetric 1/sqrt(d_i d_j)
  CsrAdj<S> mean;       // uniform 1/|N(i)|
  CsrAdj<S> structure;  // weights stripped
  Eigen::VectorXi labels;
  int num_classes = 0;
  std::vector<int> train_rows, val_rows, test_rows;

  static GraphTensors make(const Graph& g, const NormAdj& adj, const SplitMasks& m) {
    GraphTensors gt;
    gt.features = g.features.template cast<S>();
    gt.gcn = CsrAdj<S>::from(adj);
    gt.mean = CsrAdj<S>::mean_from(adj);
    gt.structure = CsrAdj<S>::structure_from(adj);
    gt.labels = g.labels;
    gt.num_classes = g.num_classes;
    for (int i = 0; i < g.num_nodes; ++i) {
      if (m.train[i]) gt.train_rows.push_back(i);
      if (m.val[i]) gt.val_rows.push_back(i);
      if (m.test[i]) gt.test_rows.push_back(i);
    }
    return gt;
  }

  int num_nodes() const { return static_cast<int>(features.rows()); }
};

namespace detail {
inline std::string layer_param(int block, int layer) {
  return "b" + std::to_string(block) + ".l" + std::to_string(layer);
}
}  // namespace detail

// One generalized layer:
//   agg  = kind-specific neighborhood aggregation of h
//   u    = (1 - alpha) agg + alpha h0
//   out  = act( (1 - beta) u + beta (u theta) )
// `attn_out`, when given, receives the per-edge attention weights of the
// attention kinds (nnz x 1, aligned with the structure operator).
template <class S>
Value layer_forward(Tape<S>& t, ParamStore<S>& store, const std::string& pname,
                    LayerKind kind, Activation act, Value h, Value h0,
                    const GraphTensors<S>& gt, S alpha, S beta,
                    Value* attn_out = nullptr) {
  Value agg;
  switch (kind) {
    case LayerKind::GCNII:
      agg = spmm(t, gt.gcn, h);
      break;
    case LayerKind::SAGEIIMean: {
      Value tw = matmul(t, h, t.param(store, pname + ".wn"));
      agg = spmm(t, gt.mean, tw);
      break;
    }
    case LayerKind::SAGEIIMax: {
      Value tw = matmul(t, h, t.param(store, pname + ".wn"));
      agg = neighbor_max(t, gt.structure, tw);
      break;
    }
    case LayerKind::GATII: {
      Value tw = matmul(t, h, t.param(store, pname + ".theta"));
      Value u = matmul(t, tw, t.param(store, pname + ".attn_dst"));
      Value v = matmul(t, tw, t.param(store, pname + ".attn_src"));
      Value e = leaky_relu(t, edge_logits(t, gt.structure, u, v), static_cast<S>(0.2));
      if (!all_finite(t.value(e))) throw NumericFault("GATII attention logits not finite");
      Value w = segment_softmax(t, gt.structure, e);
      if (attn_out) *attn_out = w;
      agg = weighted_spmm(t, gt.structure, w, h);
      break;
    }
    case LayerKind::AGNNII: {
      Value c = edge_cosine(t, gt.structure, h);
      Value e = scale_by_param(t, c, t.param(store, pname + ".temp"));
      if (!all_finite(t.value(e))) throw NumericFault("AGNNII attention logits not finite");
      Value w = segment_softmax(t, gt.structure, e);
      if (attn_out) *attn_out = w;
      agg = weighted_spmm(t, gt.structure, w, h);
      break;
    }
    case LayerKind::EoB:
      throw StateError("layer_forward: EoB is not an executable layer");
  }
  Value u = add_scaled(t, agg, static_cast<S>(1) - alpha, h0, alpha);
  Value out = u;
  if (beta != static_cast<S>(0)) {
    Value m = matmul(t, u, t.param(store, pname + ".theta"));
    out = add_scaled(t, u, static_cast<S>(1) - beta, m, beta);
  }
  Value slope;
  if (act == Activation::PReLU) slope = t.param(store, pname + ".prelu");
  return activation(t, act, out, slope);
}

// Runs one decoded block. Layers execute in index order; prefix -1 reads
// `direct`, 0 reads `resid`, k reads layer k. Outputs of layers without a
// successor are summed.
template <class S>
Value block_forward(Tape<S>& t, ParamStore<S>& store, int block_pos,
                    const BlockDag& dag, Value direct, Value resid, Value h0,
                    const GraphTensors<S>& gt, S alpha, S lambda, int depth_offset,
                    std::vector<Value>* attn_out = nullptr) {
  std::vector<Value> produced(dag.layers.size() + 1);
  for (std::size_t i = 0; i < dag.layers.size(); ++i) {
    const LayerGene& g = dag.layers[i];
    Value src;
    if (g.prefix == -1)
      src = direct;
    else if (g.prefix == 0)
      src = resid;
    else
      src = produced[g.prefix];
    const int depth = depth_offset + static_cast<int>(i) + 1;
    Value attn;
    Value out = layer_forward(t, store, detail::layer_param(block_pos, g.index),
                              g.type, g.act, src, h0, gt, alpha,
                              beta_at_depth<S>(depth, lambda), attn_out ? &attn : nullptr);
    if (attn_out && attn.valid()) attn_out->push_back(attn);
    produced[i + 1] = out;
  }
  Value out = produced[dag.sinks.front()];
  for (std::size_t s = 1; s < dag.sinks.size(); ++s)
    out = add(t, out, produced[dag.sinks[s]]);
  return out;
}

// Full model with its parameters. Parameter names are positional
// ("b<block>.l<layer>.<field>"), so equal specs share checkpoint layouts.
template <class S>
struct GnnModel {
  ModelSpec spec;
  int in_dim = 0, hidden = 0, out_dim = 0;
  double lambda = 0.5;
  ParamStore<S> params;

  void build(Rng& rng) {
    params = ParamStore<S>{};
    glorot_init(params.create("proj.w", in_dim, hidden, "fc"), rng);
    params.create("proj.b", 1, hidden, "fc");
    for (std::size_t p = 0; p < spec.blocks.size(); ++p) {
      for (const auto& g : spec.blocks[p].dag.layers) {
        const std::string base = detail::layer_param(static_cast<int>(p) + 1, g.index);
        glorot_init(params.create(base + ".theta", hidden, hidden, "conv"), rng);
        if (g.type == LayerKind::SAGEIIMean || g.type == LayerKind::SAGEIIMax)
          glorot_init(params.create(base + ".wn", hidden, hidden, "conv"), rng);
        if (g.type == LayerKind::GATII) {
          glorot_init(params.create(base + ".attn_dst", hidden, 1, "conv"), rng);
          glorot_init(params.create(base + ".attn_src", hidden, 1, "conv"), rng);
        }
        if (g.type == LayerKind::AGNNII)
          fill_constant(params.create(base + ".temp", 1, 1, "conv"), static_cast<S>(1));
        if (g.act == Activation::PReLU)
          fill_constant(params.create(base + ".prelu", 1, 1, "conv"), static_cast<S>(0.25));
      }
    }
    glorot_init(params.create("out.w", hidden, out_dim, "fc"), rng);
    params.create("out.b", 1, out_dim, "fc");
  }

  // Builds the full forward graph and returns the logits value.
  Value forward(Tape<S>& t, const GraphTensors<S>& gt, bool training,
                double input_dropout, Rng& drop_rng,
                std::vector<Value>* attn_out = nullptr) {
    Value x = t.input_ref(&gt.features);
    x = dropout(t, x, static_cast<S>(input_dropout), training, drop_rng);
    Value h0 = add_row_bias(t, matmul(t, x, t.param(params, "proj.w")),
                            t.param(params, "proj.b"));
    std::vector<Value> outs;
    int depth = 0;
    for (std::size_t p = 0; p < spec.blocks.size(); ++p) {
      const auto& blk = spec.blocks[p];
      Value direct = outs.empty() ? h0 : outs.back();
      Value din = dropout(t, direct, static_cast<S>(blk.dropout), training, drop_rng);
      Value resid;
      if (blk.residual_prefix == -1) {
        resid = din;
      } else if (blk.residual_prefix == 0) {
        resid = outs.empty() ? h0 : outs.front();
      } else {
        if (blk.residual_prefix > static_cast<int>(outs.size()))
          throw StateError("model forward: residual source not yet produced");
        resid = outs[blk.residual_prefix - 1];
      }
      Value bout = block_forward(t, params, static_cast<int>(p) + 1, blk.dag, din, resid,
                                 h0, gt, static_cast<S>(blk.alpha),
                                 static_cast<S>(lambda), depth, attn_out);
      depth += static_cast<int>(blk.dag.layers.size());
      outs.push_back(bout);
    }
    Value last = outs.empty() ? h0 : outs.back();
    return add_row_bias(t, matmul(t, last, t.param(params, "out.w")),
                        t.param(params, "out.b"));
  }
};

template <class S>
double accuracy(const Mat<S>& logits, const Eigen::VectorXi& labels,
                const std::vector<int>& rows) {
  if (rows.empty()) return 0.0;
  int hit = 0;
  for (int i : rows) {
    int best = 0;
    logits.row(i).maxCoeff(&best);
    if (best == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

// Full-batch transductive training. Masked cross-entropy on the train rows,
// Adam with decoupled group weight decay ("conv" vs "fc"). Reports
// accuracies at the best validation epoch; deterministic given `seed`.
// Divergence (non-finite loss or attention) yields failed=true, accuracy 0.
template <class S>
EvaluationResult train_model(const ModelSpec& spec, const GraphTensors<S>& gt,
                             const HyperParams& hp, std::uint64_t seed,
                             ParamStore<S>* best_params_out = nullptr) {
  const auto t_start = std::chrono::steady_clock::now();
  EvaluationResult res;
  GnnModel<S> model;
  model.spec = spec;
  model.in_dim = static_cast<int>(gt.features.cols());
  model.hidden = hp.hidden;
  model.out_dim = gt.num_classes;
  model.lambda = hp.lambda;

  Rng init_rng(derive_seed(seed, 0xA11));
  Rng drop_rng(derive_seed(seed, 0xD0));
  model.build(init_rng);

  const std::map<std::string, S> decay = {
      {"conv", static_cast<S>(hp.weight_decay_conv)},
      {"fc", static_cast<S>(hp.weight_decay_fc)}};

  ParamStore<S> best;
  double best_val = -1.0;
  const auto evaluate = [&](int epoch) {
    Tape<S> t;
    Rng dummy(0);
    Value logits = model.forward(t, gt, /*training=*/false, hp.dropout, dummy);
    const Mat<S>& L = t.value(logits);
    const double va = accuracy(L, gt.labels, gt.val_rows);
    const double ta = accuracy(L, gt.labels, gt.test_rows);
    if (va > best_val) {
      best_val = va;
      res.val_accuracy = va;
      res.test_accuracy = ta;
      res.best_epoch = epoch;
      best = model.params;
    }
  };

  try {
    evaluate(0);
    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
      Tape<S> t;
      Value logits = model.forward(t, gt, /*training=*/true, hp.dropout, drop_rng);
      Value loss = masked_cross_entropy(t, logits, gt.labels, gt.train_rows);
      const double lv = static_cast<double>(t.value(loss)(0, 0));
      if (!std::isfinite(lv)) throw NumericFault("training loss not finite");
      res.final_train_loss = lv;
      t.backward(loss);
      adam_step(model.params, static_cast<S>(hp.lr), decay);
      res.epochs_run = epoch;
      evaluate(epoch);
    }
  } catch (const NumericFault&) {
    res.failed = true;
    res.val_accuracy = 0.0;
    res.test_accuracy = 0.0;
  }
  if (!res.failed && best_params_out) *best_params_out = std::move(best);
  res.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

// Accuracy of an existing parameter set (no training); used by `eval`.
template <class S>
EvaluationResult evaluate_model(const ModelSpec& spec, const GraphTensors<S>& gt,
                                const HyperParams& hp, const ParamStore<S>& params) {
  GnnModel<S> model;
  model.spec = spec;
  model.in_dim = static_cast<int>(gt.features.cols());
  model.hidden = hp.hidden;
  model.out_dim = gt.num_classes;
  model.lambda = hp.lambda;
  Rng rng(0);
  model.build(rng);
  copy_params(model.params, params);
  Tape<S> t;
  Value logits = model.forward(t, gt, false, hp.dropout, rng);
  EvaluationResult res;
  const Mat<S>& L = t.value(logits);
  res.val_accuracy = accuracy(L, gt.labels, gt.val_rows);
  res.test_accuracy = accuracy(L, gt.labels, gt.test_rows);
  return res;
}

}  // namespace gnas
