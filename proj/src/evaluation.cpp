#include "grapher/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "grapher/errors.hpp"

namespace grapher {

std::string_view to_string(QueryFilter filter) {
    return filter == QueryFilter::all ? "all" : "multi_relevant";
}

void EvalConfig::check() const {
    if (ks.empty()) throw ConfigError("at least one K is required");
    for (auto k : ks) {
        if (k < 1) throw ConfigError("every K must be >= 1");
    }
    if (filters.empty()) throw ConfigError("at least one query filter is required");
}

std::optional<int> perfect_recall_at_k(std::span<const std::string> ranked,
                                       const std::set<std::string>& relevant, std::size_t k) {
    if (relevant.empty()) {
        return std::nullopt;
    }
    if (relevant.size() > k) {
        return 0;
    }
    const auto depth = std::min(k, ranked.size());
    std::size_t found = 0;
    std::unordered_set<std::string_view> counted;
    for (std::size_t i = 0; i < depth; ++i) {
        if (relevant.contains(ranked[i]) && counted.insert(ranked[i]).second) {
            ++found;
        }
    }
    return found == relevant.size() ? 1 : 0;
}

LatencyStats latency_stats(std::vector<double> samples) {
    LatencyStats stats;
    stats.count = samples.size();
    if (samples.empty()) return stats;
    std::sort(samples.begin(), samples.end());
    stats.mean = std::accumulate(samples.begin(), samples.end(), 0.0) /
                 static_cast<double>(samples.size());
    const auto n = samples.size();
    stats.median = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    // Nearest-rank percentile.
    auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    stats.p95 = samples[std::clamp<std::size_t>(rank, 1, n) - 1];
    return stats;
}

EvalReport evaluate_run(std::span<const RankedQuery> run, const Qrels& qrels,
                        const EvalConfig& config) {
    config.check();
    EvalReport report;
    report.config = config;
    std::map<std::pair<QueryFilter, std::size_t>, std::size_t> hits;
    std::vector<double> latencies;
    std::set<std::string> seen;

    for (const auto& query : run) {
        if (!seen.insert(query.query_id).second) {
            report.findings.push_back("query '" + query.query_id +
                                      "' appears twice in the run; later entry ignored");
            continue;
        }
        auto it = qrels.find(query.query_id);
        if (it == qrels.end()) {
            report.findings.push_back("query '" + query.query_id +
                                      "' has no relevance judgments; excluded");
            continue;
        }
        if (it->second.empty()) {
            report.findings.push_back("query '" + query.query_id +
                                      "' has an empty relevant set; excluded");
            continue;
        }
        if (query.latency_seconds) latencies.push_back(*query.latency_seconds);
        const bool multi = it->second.size() > 1;
        auto& bits = report.per_query[query.query_id];
        for (auto k : config.ks) {
            const int bit = *perfect_recall_at_k(query.ranked_ids, it->second, k);
            bits[k] = bit;
            for (auto filter : config.filters) {
                if (filter == QueryFilter::all || multi) hits[{filter, k}] += bit;
            }
        }
        for (auto filter : config.filters) {
            if (filter == QueryFilter::all || multi) ++report.query_count[filter];
        }
    }

    for (auto filter : config.filters) {
        const auto count = report.query_count[filter];
        for (auto k : config.ks) {
            if (count == 0) {
                report.aggregate[{filter, k}] = std::nullopt;
            } else {
                report.aggregate[{filter, k}] =
                    100.0 * static_cast<double>(hits[{filter, k}]) / static_cast<double>(count);
            }
        }
    }
    if (!latencies.empty()) report.latency = latency_stats(std::move(latencies));
    return report;
}

std::vector<MetricDelta> compare_runs(const EvalReport& base, const EvalReport& reranked) {
    if (!(base.config == reranked.config)) {
        throw ConfigError("reports were computed with different evaluation configs");
    }
    std::vector<MetricDelta> deltas;
    for (auto filter : base.config.filters) {
        for (auto k : base.config.ks) {
            const auto& before = base.aggregate.at({filter, k});
            const auto& after = reranked.aggregate.at({filter, k});
            MetricDelta d{filter, k, std::nullopt};
            if (before && after) d.delta = *after - *before;
            deltas.push_back(d);
        }
    }
    return deltas;
}

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string format_percent(const std::optional<double>& v, bool signed_value = false) {
    if (!v) return "N/A";
    std::ostringstream out;
    out << std::fixed << std::setprecision(1);
    if (signed_value && *v >= 0.0) out << '+';
    out << *v;
    return out.str();
}

}  // namespace

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json j;
    j["ks"] = report.config.ks;
    nlohmann::json aggregate = nlohmann::json::object();
    for (auto filter : report.config.filters) {
        nlohmann::json per_k = nlohmann::json::object();
        for (auto k : report.config.ks) {
            per_k["PR@" + std::to_string(k)] = optional_number(report.aggregate.at({filter, k}));
        }
        per_k["queries"] = report.query_count.count(filter) ? report.query_count.at(filter) : 0;
        aggregate[std::string(to_string(filter))] = std::move(per_k);
    }
    j["aggregate"] = std::move(aggregate);
    nlohmann::json per_query = nlohmann::json::object();
    for (const auto& [query, bits] : report.per_query) {
        nlohmann::json b = nlohmann::json::object();
        for (const auto& [k, bit] : bits) b["PR@" + std::to_string(k)] = bit;
        per_query[query] = std::move(b);
    }
    j["per_query"] = std::move(per_query);
    if (report.latency) {
        j["latency_s"] = {{"count", report.latency->count},
                          {"mean", report.latency->mean},
                          {"median", report.latency->median},
                          {"p95", report.latency->p95}};
    } else {
        j["latency_s"] = nullptr;
    }
    j["findings"] = report.findings;
    return j;
}

std::string to_text_table(const EvalReport& report) {
    std::ostringstream out;
    out << std::left << std::setw(16) << "filter" << std::right << std::setw(9) << "queries";
    for (auto k : report.config.ks) out << std::setw(10) << ("PR@" + std::to_string(k));
    out << '\n';
    for (auto filter : report.config.filters) {
        const auto count = report.query_count.count(filter) ? report.query_count.at(filter) : 0;
        out << std::left << std::setw(16) << to_string(filter) << std::right << std::setw(9)
            << count;
        for (auto k : report.config.ks) {
            out << std::setw(10) << format_percent(report.aggregate.at({filter, k}));
        }
        out << '\n';
    }
    if (report.latency) {
        out << std::fixed << std::setprecision(6) << "rerank latency (s): mean "
            << report.latency->mean << "  median " << report.latency->median << "  p95 "
            << report.latency->p95 << '\n';
    }
    return out.str();
}

std::string to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "k,filter,queries,pr_percent\n";
    for (auto k : report.config.ks) {
        for (auto filter : report.config.filters) {
            const auto count = report.query_count.count(filter) ? report.query_count.at(filter) : 0;
            const auto& v = report.aggregate.at({filter, k});
            out << k << ',' << to_string(filter) << ',' << count << ',';
            if (v) out << std::setprecision(10) << *v;
            out << '\n';
        }
    }
    return out.str();
}

nlohmann::json to_json(std::span<const MetricDelta> deltas) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& d : deltas) {
        j.push_back({{"filter", to_string(d.filter)}, {"k", d.k}, {"delta", optional_number(d.delta)}});
    }
    return j;
}

std::string to_text_table(std::span<const MetricDelta> deltas) {
    std::ostringstream out;
    out << std::left << std::setw(16) << "filter" << std::right << std::setw(6) << "K"
        << std::setw(10) << "delta" << '\n';
    for (const auto& d : deltas) {
        out << std::left << std::setw(16) << to_string(d.filter) << std::right << std::setw(6)
            << d.k << std::setw(10) << format_percent(d.delta, true) << '\n';
    }
    return out.str();
}

}  // namespace grapher
