#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "grapher/corpus.hpp"
#include "grapher/evaluation.hpp"
#include "grapher/graph.hpp"
#include "grapher/rerank.hpp"
#include "grapher/retriever.hpp"

namespace grapher {

// ---------------------------------------------------------------------------
// Run files

/// One query of a run in a common shape. Base runs load with final = seed = fused score
/// and algo "base".
struct RunQuery {
    std::string query_id;
    std::string algo = "base";
    RankedResult result;
    std::optional<double> latency_seconds;
    /// Normalized retriever components, kept for base runs only.
    std::vector<Candidate> base_candidates;
};

using Run = std::vector<RunQuery>;

RunQuery run_query_from_base(const ScoredCandidateList& list);

nlohmann::json rerank_line_json(const RunQuery& query);

void save_base_run(const std::filesystem::path& path,
                   const std::vector<ScoredCandidateList>& lists);
void save_rerank_run(const std::filesystem::path& path, const Run& run);

/// Reads either run shape; lines with "score" candidates are base lines.
Run load_run(const std::filesystem::path& path);

std::vector<RankedQuery> ranked_queries(const Run& run);

// ---------------------------------------------------------------------------
// Reranking a base run

struct RerankOptions {
    ProximityScheme scheme = ProximityScheme::structural;
    RerankConfig config;
    unsigned threads = 1;
    /// When set, one `<query_id>.graph.json` per query is written here.
    std::optional<std::filesystem::path> dump_graph_dir;
};

/// Graph build + rerank for every query; latency covers build, iteration and sort.
Run rerank_run(const Run& base, const Corpus& corpus, const RerankOptions& options);

/// Parses `lo:hi:step`, inclusive of hi within half a step.
std::vector<double> parse_alpha_sweep(std::string_view spec);

// ---------------------------------------------------------------------------
// Feature export / score import for an external graph ranker

enum class FeatureMode { train, infer };

FeatureMode parse_feature_mode(std::string_view name);

struct FeatureExportInputs {
    const Run* gcs_run = nullptr;
    const Corpus* corpus = nullptr;
    const std::vector<Query>* queries = nullptr;
    EmbeddingProvider* embeddings = nullptr;
    ProximityScheme scheme = ProximityScheme::structural;
    FeatureMode mode = FeatureMode::infer;
    const Qrels* qrels = nullptr;  ///< required in train mode
};

/// One record per query: node features are [gcs score] ++ query embedding ++ object
/// embedding (length 1 + 2d); labels only in train mode.
std::vector<nlohmann::json> export_features(const FeatureExportInputs& inputs);

/// Re-sorts every query of `run` by imported scores (ties: seed desc, id asc). Throws
/// MissingInputError naming the query and id of any unscored candidate.
Run import_scores(const std::vector<nlohmann::json>& score_lines, const Run& run);

std::vector<nlohmann::json> load_jsonl(const std::filesystem::path& path);
void save_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);

// ---------------------------------------------------------------------------
// Stage manifest

/// Rewrites `<dir>/manifest.jsonl`, replacing any earlier line for `stage`.
void record_manifest(const std::filesystem::path& dir, const std::string& stage,
                     const std::vector<std::filesystem::path>& inputs,
                     const nlohmann::json& config,
                     const std::vector<std::filesystem::path>& outputs);

}  // namespace grapher
