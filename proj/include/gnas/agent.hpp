#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "gnas/featurize.hpp"
#include "gnas/mlp.hpp"

namespace gnas {

// Exploration probability: 1 for the first anneal_start_frac of the budget,
// then cosine-annealed to exactly 0 at episode `total`.
struct EpsSchedule {
  int total = 0;
  double anneal_start_frac = 0.4;
};

inline double epsilon_at(int ep, const EpsSchedule& s) {
  if (s.total <= 0) throw ArgumentError("epsilon_at: schedule has no episodes");
  if (ep < 0 || ep > s.total) throw ArgumentError("epsilon_at: episode outside [0, total]");
  if (ep >= s.total) return 0.0;
  const double start = s.anneal_start_frac * s.total;
  if (ep < start || s.anneal_start_frac >= 1.0) return 1.0;
  const double span = s.total - start;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (ep - start) / span));
}

// One step of the sampling MDP. state == nullopt is the 'start' state;
// next_state is the gene just laid down. terminal <=> action is EoB.
template <class Gene>
struct Transition {
  std::optional<Gene> state;
  Gene action;
  double reward = 0.0;
  std::optional<Gene> next_state;
  bool terminal = false;
};

// FIFO ring of transitions; eviction order equals insertion order.
template <class Gene>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 300) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  const Transition<Gene>& at(std::size_t i) const { return items_[i]; }

  // Appends one contiguous episode. Exactly the last transition must be
  // terminal, and terminal must coincide with an EoB action.
  void store_episode(const std::vector<Transition<Gene>>& episode) {
    if (episode.empty()) throw ContractError("store_episode: empty episode");
    for (std::size_t i = 0; i < episode.size(); ++i) {
      const bool last = (i + 1 == episode.size());
      if (episode[i].terminal != last)
        throw ContractError(last ? "store_episode: final transition not terminal"
                                 : "store_episode: terminal transition before the end");
      if (episode[i].terminal != episode[i].action.is_eob())
        throw ContractError("store_episode: terminal flag must match EoB action");
    }
    for (const auto& tr : episode) {
      items_.push_back(tr);
      if (items_.size() > capacity_) items_.pop_front();
    }
  }

  void clear() { items_.clear(); }

 private:
  std::size_t capacity_;
  std::deque<Transition<Gene>> items_;
};

// Uniform per-step share of the episode's final reward: r_t = R / len.
inline double reshape_reward(double final_reward, int code_len) {
  if (code_len < 1) throw ArgumentError("reshape_reward: code length must be >= 1");
  return final_reward / static_cast<double>(code_len);
}

// Evaluation + frozen target Q-networks over one stage's action table.
template <class S, class Table>
struct DqnAgent {
  using Gene = typename Table::Gene;

  Table table;
  Mlp2<S> eval_net, target_net;
  ReplayBuffer<Gene> buffer;
  int batch_size = 32;
  S gamma = static_cast<S>(1);
  S lr = static_cast<S>(0.01);
  int sync_period = 100;  // episodes between target refreshes

  DqnAgent() = default;

  DqnAgent(Table t, int q_hidden, int capacity, Rng& rng)
      : table(std::move(t)), buffer(static_cast<std::size_t>(capacity)) {
    eval_net.init(table.width(), q_hidden, table.size(), Activation::ReLU, rng);
    target_net = eval_net;
  }

  Mat<S> featurize_batch(const std::vector<std::optional<Gene>>& states) const {
    Mat<S> x(static_cast<int>(states.size()), table.width());
    for (std::size_t i = 0; i < states.size(); ++i)
      x.row(static_cast<int>(i)) =
          table.featurize(states[i]).template cast<S>();
    return x;
  }
};

// Epsilon-greedy over the valid actions. Exploitation masks everything
// outside `valid` and breaks Q ties by the lowest serialized-gene order.
// eps >= 1 and eps <= 0 skip the coin flip so a forced-exploration run
// consumes exactly the draws a pure random search would.
template <class S, class Table>
typename Table::Gene select_action(DqnAgent<S, Table>& agent,
                                   const std::optional<typename Table::Gene>& state,
                                   double eps,
                                   const std::vector<typename Table::Gene>& valid,
                                   Rng& rng) {
  if (valid.empty()) throw StateError("select_action: no valid actions");
  bool explore;
  if (eps >= 1.0)
    explore = true;
  else if (eps <= 0.0)
    explore = false;
  else
    explore = rng.uniform() < eps;
  if (explore) return valid[rng.index(valid.size())];

  auto ordered = valid;
  std::sort(ordered.begin(), ordered.end(),
            [&](const auto& a, const auto& b) { return agent.table.key(a) < agent.table.key(b); });
  Mat<S> x = agent.featurize_batch({state});
  Mat<S> q = mlp2_infer(agent.eval_net, x);
  const typename Table::Gene* best = nullptr;
  S best_q = -std::numeric_limits<S>::infinity();
  for (const auto& g : ordered) {
    const S qv = q(0, agent.table.slot(g));
    if (best == nullptr || qv > best_q) {
      best = &g;
      best_q = qv;
    }
  }
  return *best;
}

inline int sync_episode_due(int episode, int sync_period) {
  return sync_period > 0 && episode % sync_period == 0;
}

template <class S, class Table>
void sync_target(DqnAgent<S, Table>& agent) {
  copy_params(agent.target_net.params, agent.eval_net.params);
}

// One TD step on a uniform minibatch:
//   y = r                                  for terminal transitions
//   y = r + gamma * max_{a' in E(s')} Q_target(s', a')   otherwise
// Returns the minibatch MSE, or nullopt (skip) while the buffer is underfull.
template <class S, class Table>
std::optional<double> td_update(DqnAgent<S, Table>& agent, Rng& rng) {
  const std::size_t n = agent.buffer.size();
  if (n < static_cast<std::size_t>(agent.batch_size)) return std::nullopt;

  // sample without replacement
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (int k = 0; k < agent.batch_size; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(n - k));
    std::swap(idx[k], idx[j]);
  }
  idx.resize(agent.batch_size);

  std::vector<std::optional<typename Table::Gene>> states;
  states.reserve(idx.size());
  for (auto i : idx) states.push_back(agent.buffer.at(i).state);
  Mat<S> x = agent.featurize_batch(states);

  Mat<S> y(agent.batch_size, 1);
  for (int k = 0; k < agent.batch_size; ++k) {
    const auto& tr = agent.buffer.at(idx[k]);
    S target = static_cast<S>(tr.reward);
    if (!tr.terminal) {
      const auto& next = *tr.next_state;
      Mat<S> xn = agent.featurize_batch({next});
      Mat<S> qn = mlp2_infer(agent.target_net, xn);
      S best = -std::numeric_limits<S>::infinity();
      for (const auto& a : agent.table.actions_at(agent.table.index_of(next) + 1))
        best = std::max(best, qn(0, agent.table.slot(a)));
      target += agent.gamma * best;
    }
    y(k, 0) = target;
  }

  Tape<S> t;
  Value q = mlp2_forward(t, agent.eval_net, t.input(std::move(x)));
  std::vector<std::pair<int, int>> picks;
  picks.reserve(idx.size());
  for (int k = 0; k < agent.batch_size; ++k)
    picks.push_back({k, agent.table.slot(agent.buffer.at(idx[k]).action)});
  Value pred = gather(t, q, picks);
  Value loss = mse_to_const(t, pred, y);
  const double out = static_cast<double>(t.value(loss)(0, 0));
  t.backward(loss);
  adam_step(agent.eval_net.params, agent.lr, {});
  return out;
}

// Samples one code by walking the MDP until EoB.
template <class S, class Table>
std::vector<typename Table::Gene> rollout(DqnAgent<S, Table>& agent, double eps, Rng& rng) {
  std::vector<typename Table::Gene> code;
  std::optional<typename Table::Gene> state;
  for (;;) {
    auto valid = agent.table.actions_at(static_cast<int>(code.size()) + 1);
    auto g = select_action(agent, state, eps, valid, rng);
    code.push_back(g);
    state = g;
    if (agent.table.is_eob(g)) break;
  }
  return code;
}

// Expands a finished episode into uniformly reshaped transitions.
template <class Gene>
std::vector<Transition<Gene>> episode_transitions(const std::vector<Gene>& code,
                                                  double final_reward) {
  if (code.empty()) throw ContractError("episode_transitions: empty code");
  const double r = reshape_reward(final_reward, static_cast<int>(code.size()));
  std::vector<Transition<Gene>> out;
  out.reserve(code.size());
  for (std::size_t i = 0; i < code.size(); ++i) {
    Transition<Gene> tr;
    tr.state = i == 0 ? std::optional<Gene>{} : std::optional<Gene>{code[i - 1]};
    tr.action = code[i];
    tr.reward = r;
    tr.next_state = code[i];
    tr.terminal = (i + 1 == code.size());
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace gnas
