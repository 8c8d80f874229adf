#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "grapher/corpus.hpp"

namespace grapher {

enum class QueryFilter { all, multi_relevant };

std::string_view to_string(QueryFilter filter);

struct EvalConfig {
    std::vector<std::size_t> ks{5, 10};
    std::vector<QueryFilter> filters{QueryFilter::all, QueryFilter::multi_relevant};

    void check() const;
    bool operator==(const EvalConfig&) const = default;
};

/// 1 when every relevant id is among the first k ranked ids, else 0; nullopt when the
/// relevant set is empty (metric undefined).
std::optional<int> perfect_recall_at_k(std::span<const std::string> ranked,
                                       const std::set<std::string>& relevant, std::size_t k);

struct RankedQuery {
    std::string query_id;
    std::vector<std::string> ranked_ids;
    /// Wall-clock seconds for graph build + rerank, when measured.
    std::optional<double> latency_seconds;
};

struct LatencyStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double p95 = 0.0;
};

LatencyStats latency_stats(std::vector<double> samples);

struct EvalReport {
    EvalConfig config;
    /// query id -> (k -> PR@k bit)
    std::map<std::string, std::map<std::size_t, int>> per_query;
    /// (filter, k) -> percentage in [0, 100]; nullopt when the filtered set is empty.
    std::map<std::pair<QueryFilter, std::size_t>, std::optional<double>> aggregate;
    std::map<QueryFilter, std::size_t> query_count;
    std::optional<LatencyStats> latency;
    std::vector<std::string> findings;
};

EvalReport evaluate_run(std::span<const RankedQuery> run, const Qrels& qrels,
                        const EvalConfig& config = {});

struct MetricDelta {
    QueryFilter filter;
    std::size_t k;
    std::optional<double> delta;  ///< reranked minus base, percentage points
};

/// Throws ConfigError when the reports were computed with different configs.
std::vector<MetricDelta> compare_runs(const EvalReport& base, const EvalReport& reranked);

nlohmann::json to_json(const EvalReport& report);
std::string to_text_table(const EvalReport& report);
std::string to_csv(const EvalReport& report);

nlohmann::json to_json(std::span<const MetricDelta> deltas);
std::string to_text_table(std::span<const MetricDelta> deltas);

}  // namespace grapher
