#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <future>
#include <memory>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "gnas/agent.hpp"
#include "gnas/engine.hpp"
#include "gnas/oracle.hpp"
#include "gnas/serialize.hpp"

namespace gnas {

struct Provenance {
  std::string dataset;
  std::uint64_t seed = 0;
  int episode = 0;
};

struct PoolEntry {
  BlockCode code;
  double score = 0.0;
  Provenance prov;
};

// Top-N scored blocks carried from stage one to stage two. Sorted by score
// descending (earlier discovery wins ties); identical codes are deduplicated,
// keeping the higher score.
struct BlockPool {
  int capacity = 3;
  std::vector<PoolEntry> entries;

  double min_score() const { return entries.empty() ? 0.0 : entries.back().score; }
  bool full() const { return static_cast<int>(entries.size()) >= capacity; }

  std::vector<BlockCode> codes() const {
    std::vector<BlockCode> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.code);
    return out;
  }
};

// Inserts iff the pool is underfull or the score beats the current minimum.
// Returns whether the pool changed.
bool update_gbp(BlockPool& pool, const BlockCode& code, double score,
                const Provenance& prov);

struct TraceRow {
  int episode = 0;
  double epsilon = 0.0;
  double reward = 0.0;
  double best = 0.0;
  std::string code;
  long wall_ms = 0;
  double td_loss = 0.0;  // minibatch TD loss of this episode's update (0 when skipped)
};

struct SearchRun {
  std::string stage;  // "block" | "arch"
  bool random_policy = false;
  bool transferred = false;
  int budget = 0;
  std::uint64_t seed = 0;
  std::vector<TraceRow> trace;
  std::vector<int> sync_episodes;
  double best_reward = 0.0;
  int best_episode = 0;
  double wall_time_s = 0.0;
};

enum class RunStatus { Completed, Interrupted };

// Hooks threaded through a search: cooperative stop (SIGINT or the
// stop_after testing hook), per-episode progress, and the evaluation
// concurrency cap. Rollouts inside one generation of `jobs` episodes share
// the pre-generation networks; commits happen in episode order, so a run is
// deterministic for a fixed (seed, jobs) pair.
struct RunControl {
  std::function<bool()> stop;
  std::function<void(const TraceRow&)> on_episode;
  int stop_after = 0;  // complete this many episodes, then interrupt (0 = off)
  int jobs = 1;
  bool deterministic_trace = true;  // zero the wall_ms trace column
};

// Reward source for one episode. Implementations must tolerate concurrent
// calls when RunControl::jobs > 1.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual double evaluate_block(const BlockCode& code, std::uint64_t eval_seed) = 0;
  virtual double evaluate_arch(const ArchCode& code, const std::vector<BlockCode>& pool,
                               std::uint64_t eval_seed) = 0;
};

// Trains the decoded model on the held dataset; the reward is the validation
// accuracy at the best validation epoch. Stage one wraps each block in the
// standard architecture with the fixed stage-one hyperparameters.
template <class S>
class RealEvaluator : public Evaluator {
 public:
  RealEvaluator(const GraphTensors<S>& gt, SpaceConfig cfg, HyperParams hp)
      : gt_(&gt), cfg_(std::move(cfg)), hp_(hp) {}

  double evaluate_block(const BlockCode& code, std::uint64_t eval_seed) override {
    const ArchCode arch = standard_architecture(code, cfg_, hp_.dropout, hp_.alpha);
    const ModelSpec spec = decode_arch(arch, {code}, cfg_);
    return train_model<S>(spec, *gt_, hp_, eval_seed).val_accuracy;
  }

  double evaluate_arch(const ArchCode& code, const std::vector<BlockCode>& pool,
                       std::uint64_t eval_seed) override {
    const ModelSpec spec = decode_arch(code, pool, cfg_);
    return train_model<S>(spec, *gt_, hp_, eval_seed).val_accuracy;
  }

 private:
  const GraphTensors<S>* gt_;
  SpaceConfig cfg_;
  HyperParams hp_;
};

// Code-level reward functions; ignores the evaluation seed.
class SyntheticEvaluator : public Evaluator {
 public:
  SyntheticEvaluator(OracleKind kind, SpaceConfig cfg) : kind_(kind), cfg_(std::move(cfg)) {}

  double evaluate_block(const BlockCode& code, std::uint64_t) override {
    return oracle_score(kind_, code, cfg_);
  }
  double evaluate_arch(const ArchCode& code, const std::vector<BlockCode>&,
                       std::uint64_t) override {
    return oracle_score(kind_, code, cfg_);
  }

 private:
  OracleKind kind_;
  SpaceConfig cfg_;
};

struct AgentConfig {
  int episodes_block = 1500;
  int episodes_arch = 1000;
  int capacity = 300;
  int batch_size = 32;
  double gamma = 1.0;
  int sync_period = 100;
  double anneal_start_frac = 0.4;
  int q_hidden = 64;
  double lr = 0.01;
  int pool_size = 3;
};

namespace detail {

template <class Gene>
auto genes_to_code(std::vector<Gene> genes) {
  if constexpr (std::is_same_v<Gene, LayerGene>)
    return BlockCode{std::move(genes)};
  else
    return ArchCode{std::move(genes)};
}

inline std::uint64_t episode_eval_seed(std::uint64_t seed, int episode) {
  return derive_seed(seed, 0xE7A1u + static_cast<std::uint64_t>(episode));
}

}  // namespace detail

// Stage driver: owns the agent, the exploration schedule, and the separated
// random streams (rollout draws never interleave with update or evaluation
// draws, so a run with epsilon pinned to 1 reproduces a random search
// rollout-for-rollout).
template <class S, class Table>
class StageDriver {
 public:
  using Gene = typename Table::Gene;
  using Code = decltype(detail::genes_to_code(std::declval<std::vector<Gene>>()));

  StageDriver(Table table, const AgentConfig& acfg, int budget, std::uint64_t seed,
              bool learn)
      : seed_(seed), learn_(learn) {
    Rng init_rng(derive_seed(seed, 0x1417));
    agent_ = DqnAgent<S, Table>(std::move(table), acfg.q_hidden, acfg.capacity, init_rng);
    agent_.batch_size = acfg.batch_size;
    agent_.gamma = static_cast<S>(acfg.gamma);
    agent_.lr = static_cast<S>(acfg.lr);
    agent_.sync_period = acfg.sync_period;
    sched_ = EpsSchedule{budget, learn ? acfg.anneal_start_frac : 1.0};
    roll_rng_ = Rng(derive_seed(seed, 0x2011));
    upd_rng_ = Rng(derive_seed(seed, 0x3022));
    run_.budget = budget;
    run_.seed = seed;
    run_.random_policy = !learn;
  }

  DqnAgent<S, Table>& agent() { return agent_; }
  SearchRun& run() { return run_; }
  const SearchRun& run() const { return run_; }
  int next_episode() const { return next_episode_; }

  // Executes episodes until the budget, a stop request, or stop_after.
  RunStatus drive(const std::function<double(const Code&, std::uint64_t)>& evaluate,
                  const std::function<void(const Code&, double, int)>& commit,
                  const RunControl& ctl) {
    const auto t0 = std::chrono::steady_clock::now();
    const int budget = run_.budget;
    if (budget <= 0) throw ArgumentError("search budget must be >= 1 episode");
    RunStatus status = RunStatus::Completed;
    while (next_episode_ <= budget) {
      if (ctl.stop && ctl.stop()) {
        status = RunStatus::Interrupted;
        break;
      }
      int gen = std::max(1, std::min(ctl.jobs, budget - next_episode_ + 1));
      if (ctl.stop_after > 0)
        gen = std::min(gen, std::max(1, ctl.stop_after - next_episode_ + 1));

      std::vector<Code> codes(gen);
      std::vector<double> eps(gen);
      for (int w = 0; w < gen; ++w) {
        eps[w] = epsilon_at(next_episode_ + w - 1, sched_);
        codes[w] = detail::genes_to_code(rollout(agent_, eps[w], roll_rng_));
      }

      std::vector<double> rewards(gen, 0.0);
      std::vector<long> walls(gen, 0);
      auto eval_one = [&](int w) {
        const int ep = next_episode_ + w;
        const auto e0 = std::chrono::steady_clock::now();
        double r = 0.0;
        try {
          r = std::clamp(evaluate(codes[w], detail::episode_eval_seed(seed_, ep)), 0.0, 1.0);
        } catch (const std::exception&) {
          r = 0.0;  // failed evaluation scores zero; the search continues
        }
        walls[w] = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - e0)
                       .count();
        return r;
      };
      if (gen == 1) {
        rewards[0] = eval_one(0);
      } else {
        std::vector<std::future<double>> futs;
        futs.reserve(gen);
        for (int w = 0; w < gen; ++w)
          futs.push_back(std::async(std::launch::async, eval_one, w));
        for (int w = 0; w < gen; ++w) rewards[w] = futs[w].get();
      }

      for (int w = 0; w < gen; ++w) {
        const int ep = next_episode_ + w;
        double td_loss = 0.0;
        if (learn_) {
          agent_.buffer.store_episode(episode_transitions(codes[w].genes, rewards[w]));
          td_loss = td_update(agent_, upd_rng_).value_or(0.0);
          if (sync_episode_due(ep, agent_.sync_period)) {
            sync_target(agent_);
            run_.sync_episodes.push_back(ep);
          }
        }
        if (run_.trace.empty() || rewards[w] > run_.best_reward) {
          run_.best_reward = rewards[w];
          run_.best_episode = ep;
        }
        TraceRow row;
        row.episode = ep;
        row.epsilon = eps[w];
        row.reward = rewards[w];
        row.best = run_.best_reward;
        row.code = compact_string(codes[w]);
        row.wall_ms = ctl.deterministic_trace ? 0 : walls[w];
        row.td_loss = td_loss;
        run_.trace.push_back(row);
        commit(codes[w], rewards[w], ep);
        if (ctl.on_episode) ctl.on_episode(row);
      }
      next_episode_ += gen;
      if (ctl.stop_after > 0 && next_episode_ > ctl.stop_after && next_episode_ <= budget) {
        status = RunStatus::Interrupted;
        break;
      }
    }
    run_.wall_time_s +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return status;
  }

  nlohmann::json checkpoint() const {
    nlohmann::json j;
    j["next_episode"] = next_episode_;
    j["learn"] = learn_;
    j["seed"] = seed_;
    j["sched_total"] = sched_.total;
    j["sched_frac"] = sched_.anneal_start_frac;
    j["roll_rng"] = roll_rng_.save_state();
    j["upd_rng"] = upd_rng_.save_state();
    j["eval_net"] = params_to_json(agent_.eval_net.params);
    j["target_net"] = params_to_json(agent_.target_net.params);
    nlohmann::json buf = nlohmann::json::array();
    for (std::size_t i = 0; i < agent_.buffer.size(); ++i)
      buf.push_back(transition_to_json(agent_.buffer.at(i)));
    j["buffer"] = std::move(buf);
    j["run"] = run_to_json(run_);
    return j;
  }

  void restore(const nlohmann::json& j) {
    next_episode_ = j.at("next_episode").get<int>();
    sched_.total = j.at("sched_total").get<int>();
    sched_.anneal_start_frac = j.at("sched_frac").get<double>();
    roll_rng_.load_state(j.at("roll_rng").get<std::string>());
    upd_rng_.load_state(j.at("upd_rng").get<std::string>());
    agent_.eval_net.params = params_from_json<S>(j.at("eval_net"));
    agent_.target_net.params = params_from_json<S>(j.at("target_net"));
    agent_.buffer.clear();
    // reload transitions one episode at a time (episodes end at terminals)
    std::vector<Transition<Gene>> ep;
    for (const auto& item : j.at("buffer")) {
      ep.push_back(transition_from_json<Gene>(item));
      if (ep.back().terminal) {
        agent_.buffer.store_episode(ep);
        ep.clear();
      }
    }
    if (!ep.empty()) throw ParseError("agent checkpoint: buffer ends mid-episode");
    run_ = run_from_json(j.at("run"));
  }

  static nlohmann::json run_to_json(const SearchRun& r) {
    nlohmann::json j;
    j["stage"] = r.stage;
    j["random_policy"] = r.random_policy;
    j["transferred"] = r.transferred;
    j["budget"] = r.budget;
    j["seed"] = r.seed;
    j["best_reward"] = r.best_reward;
    j["best_episode"] = r.best_episode;
    j["wall_time_s"] = r.wall_time_s;
    j["sync_episodes"] = r.sync_episodes;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& t : r.trace)
      rows.push_back({t.episode, t.epsilon, t.reward, t.best, t.code, t.wall_ms, t.td_loss});
    j["trace"] = std::move(rows);
    return j;
  }

  static SearchRun run_from_json(const nlohmann::json& j) {
    SearchRun r;
    r.stage = j.at("stage").get<std::string>();
    r.random_policy = j.at("random_policy").get<bool>();
    r.transferred = j.at("transferred").get<bool>();
    r.budget = j.at("budget").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.best_reward = j.at("best_reward").get<double>();
    r.best_episode = j.at("best_episode").get<int>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.sync_episodes = j.at("sync_episodes").get<std::vector<int>>();
    for (const auto& row : j.at("trace")) {
      TraceRow t;
      t.episode = row.at(0).get<int>();
      t.epsilon = row.at(1).get<double>();
      t.reward = row.at(2).get<double>();
      t.best = row.at(3).get<double>();
      t.code = row.at(4).get<std::string>();
      t.wall_ms = row.at(5).get<long>();
      t.td_loss = row.at(6).get<double>();
      r.trace.push_back(std::move(t));
    }
    return r;
  }

 private:
  DqnAgent<S, Table> agent_;
  EpsSchedule sched_;
  Rng roll_rng_{0}, upd_rng_{0};
  std::uint64_t seed_ = 0;
  bool learn_ = true;
  int next_episode_ = 1;
  SearchRun run_;
};

// Stage one: block-wise search guarded by the block pool.
template <class S>
class BlockSearch {
 public:
  BlockSearch(const SpaceConfig& cfg, const AgentConfig& acfg, int budget,
              std::uint64_t seed, bool learn = true, std::string dataset_name = "")
      : driver_(BlockStageTable{cfg}, acfg, budget, seed, learn),
        dataset_(std::move(dataset_name)) {
    pool_.capacity = acfg.pool_size;
    driver_.run().stage = "block";
  }

  RunStatus run(Evaluator& ev, const RunControl& ctl = {}) {
    return driver_.drive(
        [&ev](const BlockCode& code, std::uint64_t s) { return ev.evaluate_block(code, s); },
        [this](const BlockCode& code, double reward, int episode) {
          update_gbp(pool_, code, reward,
                     Provenance{dataset_, driver_.run().seed, episode});
        },
        ctl);
  }

  const BlockPool& pool() const { return pool_; }
  const SearchRun& result() const { return driver_.run(); }
  StageDriver<S, BlockStageTable>& driver() { return driver_; }

  nlohmann::json checkpoint() const {
    nlohmann::json j = driver_.checkpoint();
    j["pool"] = pool_to_json(pool_);
    j["dataset"] = dataset_;
    return j;
  }

  void restore(const nlohmann::json& j) {
    driver_.restore(j);
    pool_ = pool_from_json(j.at("pool"));
    dataset_ = j.value("dataset", "");
  }

  static nlohmann::json pool_to_json(const BlockPool& p) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : p.entries) {
      nlohmann::json je;
      je["code"] = nlohmann::json::parse(serialize_block(e.code));
      je["score"] = e.score;
      je["provenance"] = {{"dataset", e.prov.dataset},
                          {"seed", e.prov.seed},
                          {"episode", e.prov.episode}};
      entries.push_back(std::move(je));
    }
    nlohmann::json j;
    j["capacity"] = p.capacity;
    j["entries"] = std::move(entries);
    return j;
  }

  static BlockPool pool_from_json(const nlohmann::json& j) {
    BlockPool p;
    p.capacity = j.at("capacity").get<int>();
    for (const auto& je : j.at("entries")) {
      PoolEntry e;
      e.code = parse_block(je.at("code").dump());
      e.score = je.at("score").get<double>();
      const auto& prov = je.at("provenance");
      e.prov.dataset = prov.value("dataset", "");
      e.prov.seed = prov.value("seed", std::uint64_t{0});
      e.prov.episode = prov.value("episode", 0);
      p.entries.push_back(std::move(e));
    }
    return p;
  }

 private:
  StageDriver<S, BlockStageTable> driver_;
  BlockPool pool_;
  std::string dataset_;
};

// Stage two: architecture-wise search over a fixed block pool; tracks the
// single best code instead of a pool. The agent is built fresh (stage-specific
// featurization width), never reusing stage-one weights.
template <class S>
class ArchSearch {
 public:
  ArchSearch(const SpaceConfig& cfg, const AgentConfig& acfg, std::vector<BlockCode> pool,
             int budget, std::uint64_t seed, bool learn = true)
      : driver_(ArchStageTable{cfg, static_cast<int>(pool.size())}, acfg, budget, seed,
                learn),
        pool_(std::move(pool)) {
    if (pool_.empty()) throw StateError("arch search: empty block pool");
    driver_.run().stage = "arch";
  }

  RunStatus run(Evaluator& ev, const RunControl& ctl = {}) {
    return driver_.drive(
        [&](const ArchCode& code, std::uint64_t s) {
          return ev.evaluate_arch(code, pool_, s);
        },
        [this](const ArchCode& code, double reward, int episode) {
          if (!have_best_ || reward > best_score_) {
            best_code_ = code;
            best_score_ = reward;
            best_episode_ = episode;
            have_best_ = true;
          }
        },
        ctl);
  }

  const std::vector<BlockCode>& pool() const { return pool_; }
  const ArchCode& best_code() const {
    if (!have_best_) throw StateError("arch search: no completed episodes");
    return best_code_;
  }
  double best_score() const { return best_score_; }
  int best_episode() const { return best_episode_; }
  const SearchRun& result() const { return driver_.run(); }
  StageDriver<S, ArchStageTable>& driver() { return driver_; }
  void mark_transferred() { driver_.run().transferred = true; }

  nlohmann::json checkpoint() const {
    nlohmann::json j = driver_.checkpoint();
    nlohmann::json pj = nlohmann::json::array();
    for (const auto& b : pool_) pj.push_back(nlohmann::json::parse(serialize_block(b)));
    j["pool_codes"] = std::move(pj);
    j["have_best"] = have_best_;
    if (have_best_) {
      j["best_code"] = nlohmann::json::parse(serialize_arch(best_code_));
      j["best_score"] = best_score_;
      j["best_episode_commit"] = best_episode_;
    }
    return j;
  }

  void restore(const nlohmann::json& j) {
    driver_.restore(j);
    have_best_ = j.at("have_best").get<bool>();
    if (have_best_) {
      best_code_ = parse_arch(j.at("best_code").dump());
      best_score_ = j.at("best_score").get<double>();
      best_episode_ = j.at("best_episode_commit").get<int>();
    }
  }

 private:
  StageDriver<S, ArchStageTable> driver_;
  std::vector<BlockCode> pool_;
  ArchCode best_code_;
  double best_score_ = 0.0;
  int best_episode_ = 0;
  bool have_best_ = false;
};

// --- convenience wrappers (complete, uninterrupted runs) ---

template <class S>
std::pair<BlockPool, SearchRun> search_blocks(const SpaceConfig& cfg, const AgentConfig& acfg,
                                              Evaluator& ev, int budget, std::uint64_t seed,
                                              const RunControl& ctl = {},
                                              const std::string& dataset = "") {
  BlockSearch<S> s(cfg, acfg, budget, seed, /*learn=*/true, dataset);
  s.run(ev, ctl);
  return {s.pool(), s.result()};
}

template <class S>
SearchRun random_search(const SpaceConfig& cfg, const AgentConfig& acfg, Evaluator& ev,
                        int budget, std::uint64_t seed, const RunControl& ctl = {}) {
  BlockSearch<S> s(cfg, acfg, budget, seed, /*learn=*/false);
  s.run(ev, ctl);
  return s.result();
}

template <class S>
std::tuple<ArchCode, double, SearchRun> search_arch(const SpaceConfig& cfg,
                                                    const AgentConfig& acfg,
                                                    const std::vector<BlockCode>& pool,
                                                    Evaluator& ev, int budget,
                                                    std::uint64_t seed,
                                                    const RunControl& ctl = {}) {
  ArchSearch<S> s(cfg, acfg, pool, budget, seed);
  s.run(ev, ctl);
  return {s.best_code(), s.best_score(), s.result()};
}

// --- structural-diversity ablation ---

struct AblationRow {
  int depth = 0;
  std::string variant;  // "blocked" | "chain"
  double accuracy = 0.0;
  std::uint64_t seed = 0;
};

// For each depth: (a) the standard architecture built from `block`, sized to
// the nearest block multiple of the requested depth, and (b) a plain
// GCNII/relu chain of exactly that depth. Test accuracy per trained model.
template <class S>
std::vector<AblationRow> diversity_ablation(const BlockCode& block,
                                            const std::vector<int>& depths,
                                            const GraphTensors<S>& gt,
                                            const SpaceConfig& cfg, const HyperParams& hp,
                                            std::uint64_t seed, int jobs = 1) {
  auto violations = validate_block(block, cfg);
  if (!violations.empty())
    throw ArgumentError("diversity_ablation: invalid block: " + violations.front());
  const int layers_per_block = block.num_layers();
  std::vector<std::pair<AblationRow, ModelSpec>> work;
  for (int d : depths) {
    if (d < 1) throw ArgumentError("diversity_ablation: depth must be >= 1");
    SpaceConfig sized = cfg;
    sized.max_blocks = std::max(
        1, static_cast<int>(std::lround(static_cast<double>(d) / layers_per_block)));
    const ArchCode arch = standard_architecture(block, sized, hp.dropout, hp.alpha);
    work.push_back({AblationRow{d, "blocked", 0.0, seed}, decode_arch(arch, {block}, sized)});
    work.push_back({AblationRow{d, "chain", 0.0, seed},
                    chain_model(LayerKind::GCNII, Activation::ReLU, d, hp.dropout, hp.alpha,
                                Activation::ReLU)});
  }
  auto train_one = [&](std::size_t i) {
    return train_model<S>(work[i].second, gt, hp, seed).test_accuracy;
  };
  if (jobs <= 1) {
    for (std::size_t i = 0; i < work.size(); ++i) work[i].first.accuracy = train_one(i);
  } else {
    for (std::size_t base = 0; base < work.size(); base += jobs) {
      std::vector<std::future<double>> futs;
      const std::size_t hi = std::min(work.size(), base + jobs);
      for (std::size_t i = base; i < hi; ++i)
        futs.push_back(std::async(std::launch::async, train_one, i));
      for (std::size_t i = base; i < hi; ++i) work[i].first.accuracy = futs[i - base].get();
    }
  }
  std::vector<AblationRow> rows;
  rows.reserve(work.size());
  for (auto& [row, spec] : work) rows.push_back(row);
  return rows;
}

}  // namespace gnas
