#pragma once

#include <string>
#include <vector>

#include "gnas/search.hpp"

namespace gnas {

// Atomic file write: temp file in the same directory, then rename.
void atomic_write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// trace.csv: header episode,epsilon,reward,best_so_far,code,wall_ms.
std::string trace_csv(const SearchRun& run);

// agent_trace.csv: the learner's view, episode,epsilon,reward,code,td_loss.
std::string agent_trace_csv(const SearchRun& run);

std::string summary_json(const SearchRun& run);

// GBP file: top-N block codes with scores and provenance, plus the hidden
// size the scores were obtained with (transfer requires it to match).
std::string gbp_file_json(const BlockPool& pool, int hidden);
BlockPool load_gbp_file(const std::string& path, int* hidden_out);

// Self-contained architecture file: the referenced block codes are inlined,
// so `train` can rebuild the model without the originating pool.
std::string arch_file_json(const ArchCode& code, const std::vector<BlockCode>& pool,
                           double score, const Provenance& prov);
struct ArchFile {
  ArchCode code;
  std::vector<BlockCode> blocks;
  double score = 0.0;
};
ArchFile load_arch_file(const std::string& path);

// Block-code file (single JSON code array).
BlockCode load_block_file(const std::string& path);

std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace gnas
