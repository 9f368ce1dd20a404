#include "gnas/run_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gnas {

bool update_gbp(BlockPool& pool, const BlockCode& code, double score,
                const Provenance& prov) {
  if (!(score >= 0.0 && score <= 1.0))
    throw ArgumentError("update_gbp: score must lie in [0,1]");
  for (auto& e : pool.entries) {
    if (e.code == code) {
      if (score > e.score) {
        e.score = score;
        e.prov = prov;
        std::stable_sort(pool.entries.begin(), pool.entries.end(),
                         [](const PoolEntry& a, const PoolEntry& b) { return a.score > b.score; });
        return true;
      }
      return false;
    }
  }
  if (!pool.full()) {
    pool.entries.push_back(PoolEntry{code, score, prov});
  } else if (score > pool.min_score()) {
    pool.entries.back() = PoolEntry{code, score, prov};
  } else {
    return false;
  }
  std::stable_sort(pool.entries.begin(), pool.entries.end(),
                   [](const PoolEntry& a, const PoolEntry& b) { return a.score > b.score; });
  return true;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << content;
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

namespace {
std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}
}  // namespace

std::string trace_csv(const SearchRun& run) {
  std::ostringstream out;
  out << "episode,epsilon,reward,best_so_far,code,wall_ms\n";
  for (const auto& r : run.trace) {
    out << r.episode << ',' << fmt6(r.epsilon) << ',' << fmt6(r.reward) << ','
        << fmt6(r.best) << ',' << r.code << ',' << r.wall_ms << '\n';
  }
  return out.str();
}

std::string agent_trace_csv(const SearchRun& run) {
  std::ostringstream out;
  out << "episode,epsilon,reward,code,td_loss\n";
  for (const auto& r : run.trace) {
    out << r.episode << ',' << fmt6(r.epsilon) << ',' << fmt6(r.reward) << ',' << r.code
        << ',' << fmt6(r.td_loss) << '\n';
  }
  return out.str();
}

std::string summary_json(const SearchRun& run) {
  nlohmann::json j;
  j["stage"] = run.stage;
  j["random_policy"] = run.random_policy;
  j["transferred"] = run.transferred;
  j["budget"] = run.budget;
  j["episodes_done"] = run.trace.size();
  j["seed"] = run.seed;
  j["best_reward"] = run.best_reward;
  j["best_episode"] = run.best_episode;
  j["wall_time_s"] = run.wall_time_s;
  return j.dump(2) + "\n";
}

std::string gbp_file_json(const BlockPool& pool, int hidden) {
  nlohmann::json j;
  j["version"] = 1;
  j["kind"] = "gbp";
  j["hidden"] = hidden;
  j["capacity"] = pool.capacity;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : pool.entries) {
    nlohmann::json je;
    je["code"] = nlohmann::json::parse(serialize_block(e.code));
    je["score"] = e.score;
    je["provenance"] = {{"dataset", e.prov.dataset},
                        {"seed", e.prov.seed},
                        {"episode", e.prov.episode}};
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  return j.dump(2) + "\n";
}

BlockPool load_gbp_file(const std::string& path, int* hidden_out) {
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw ParseError(path + ": malformed JSON");
  if (j.value("kind", "") != "gbp") throw FormatError(path + ": not a GBP file");
  if (hidden_out) *hidden_out = j.value("hidden", 0);
  BlockPool pool;
  pool.capacity = j.value("capacity", 3);
  try {
    for (const auto& je : j.at("entries")) {
      PoolEntry e;
      e.code = parse_block(je.at("code").dump());
      e.score = je.at("score").get<double>();
      if (je.contains("provenance")) {
        const auto& p = je.at("provenance");
        e.prov.dataset = p.value("dataset", "");
        e.prov.seed = p.value("seed", std::uint64_t{0});
        e.prov.episode = p.value("episode", 0);
      }
      pool.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (pool.entries.empty()) throw FormatError(path + ": empty block pool");
  return pool;
}

std::string arch_file_json(const ArchCode& code, const std::vector<BlockCode>& pool,
                           double score, const Provenance& prov) {
  nlohmann::json j;
  j["version"] = 1;
  j["kind"] = "arch";
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : pool) blocks.push_back(nlohmann::json::parse(serialize_block(b)));
  j["blocks"] = std::move(blocks);
  j["genes"] = nlohmann::json::parse(serialize_arch(code));
  j["score"] = score;
  j["provenance"] = {{"dataset", prov.dataset}, {"seed", prov.seed}, {"episode", prov.episode}};
  return j.dump(2) + "\n";
}

ArchFile load_arch_file(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw ParseError(path + ": malformed JSON");
  if (j.value("kind", "") != "arch") throw FormatError(path + ": not an architecture file");
  ArchFile out;
  try {
    for (const auto& b : j.at("blocks")) out.blocks.push_back(parse_block(b.dump()));
    out.code = parse_arch(j.at("genes").dump());
    out.score = j.value("score", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return out;
}

BlockCode load_block_file(const std::string& path) { return parse_block(read_file(path)); }

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "depth,variant,accuracy,seed\n";
  for (const auto& r : rows)
    out << r.depth << ',' << r.variant << ',' << fmt6(r.accuracy) << ',' << r.seed << '\n';
  return out.str();
}

}  // namespace gnas
