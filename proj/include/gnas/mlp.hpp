#pragma once

#include <string>

#include "gnas/tape.hpp"

namespace gnas {

// Two-layer perceptron: activation(x W1 + b1) W2 + b2. Used as the Q-value
// approximator; owns its parameters.
template <class S>
struct Mlp2 {
  ParamStore<S> params;
  Activation hidden_act = Activation::ReLU;
  int in = 0, hidden = 0, out = 0;

  void init(int in_dim, int hidden_dim, int out_dim, Activation act, Rng& rng) {
    in = in_dim;
    hidden = hidden_dim;
    out = out_dim;
    hidden_act = act;
    params = ParamStore<S>{};
    glorot_init(params.create("w1", in, hidden, "fc"), rng);
    params.create("b1", 1, hidden, "fc");
    glorot_init(params.create("w2", hidden, out, "fc"), rng);
    params.create("b2", 1, out, "fc");
  }
};

template <class S>
Value mlp2_forward(Tape<S>& t, Mlp2<S>& net, Value x) {
  if (t.value(x).cols() != net.in) throw ShapeError("mlp2_forward: input width");
  Value h = add_row_bias(t, matmul(t, x, t.param(net.params, "w1")),
                         t.param(net.params, "b1"));
  h = activation(t, net.hidden_act, h);
  return add_row_bias(t, matmul(t, h, t.param(net.params, "w2")),
                      t.param(net.params, "b2"));
}

// Gradient-free forward for action selection and target computation.
template <class S>
Mat<S> mlp2_infer(const Mlp2<S>& net, const Mat<S>& x) {
  if (x.cols() != net.in) throw ShapeError("mlp2_infer: input width");
  Mat<S> h = (x * net.params.at("w1").value).rowwise() + net.params.at("b1").value.row(0);
  switch (net.hidden_act) {
    case Activation::ReLU: h = h.cwiseMax(static_cast<S>(0)); break;
    case Activation::Tanh: h = h.array().tanh().matrix(); break;
    case Activation::ELU:
      h = h.unaryExpr([](S v) {
        return v > 0 ? v : static_cast<S>(std::expm1(static_cast<double>(v)));
      });
      break;
    case Activation::Identity:
    case Activation::None: break;
    case Activation::PReLU:
      throw StateError("mlp2_infer: prelu hidden activation unsupported");
  }
  return (h * net.params.at("w2").value).rowwise() + net.params.at("b2").value.row(0);
}

}  // namespace gnas
