#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "grapher/corpus.hpp"
#include "grapher/matrix.hpp"

namespace grapher {

enum class ProximityScheme { structural, conceptual, contextual, union_max };

/// Throws ConfigError for an unknown name. Accepts structural|conceptual|contextual|union.
ProximityScheme parse_scheme(std::string_view name);
std::string_view to_string(ProximityScheme scheme);

/// Weighted adjacency over the candidates of one query. Node i is `ids[i]`.
struct CandidateGraph {
    std::vector<std::string> ids;
    SquareMatrix adjacency;
    ProximityScheme scheme = ProximityScheme::structural;

    std::size_t size() const noexcept { return ids.size(); }
    /// Non-zero entries; a symmetric pair counts twice.
    std::size_t edge_count() const;
};

/// A_ij = 1 when either object lists the other in structural_links; links leaving the
/// candidate set are ignored.
CandidateGraph build_structural(std::span<const std::string> candidates, const Corpus& corpus);

/// A_ij = |E_i ∩ E_j| / |E_j| over unique entities; asymmetric.
CandidateGraph build_conceptual(std::span<const std::string> candidates, const Corpus& corpus);

/// A_ij = 1 for adjacent chunks of one document.
CandidateGraph build_contextual(std::span<const std::string> candidates, const Corpus& corpus);

/// Dispatch; `union_max` is the element-wise maximum of the three schemes (experimental).
CandidateGraph build_graph(std::span<const std::string> candidates, const Corpus& corpus,
                           ProximityScheme scheme);

/// `{"ids": [...], "edges": [[i, j, w], ...]}` with non-zero entries only.
nlohmann::json dump_graph(const CandidateGraph& graph);

}  // namespace grapher
