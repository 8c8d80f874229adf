#include "grapher/graph.hpp"

#include <algorithm>
#include <cstdlib>
#include <unordered_map>
#include <unordered_set>

#include "grapher/errors.hpp"

namespace grapher {

ProximityScheme parse_scheme(std::string_view name) {
    if (name == "structural") return ProximityScheme::structural;
    if (name == "conceptual") return ProximityScheme::conceptual;
    if (name == "contextual") return ProximityScheme::contextual;
    if (name == "union") return ProximityScheme::union_max;
    throw ConfigError("unknown proximity scheme '" + std::string(name) +
                      "' (expected structural|conceptual|contextual|union)");
}

std::string_view to_string(ProximityScheme scheme) {
    switch (scheme) {
        case ProximityScheme::structural: return "structural";
        case ProximityScheme::conceptual: return "conceptual";
        case ProximityScheme::contextual: return "contextual";
        case ProximityScheme::union_max: return "union";
    }
    return "unknown";
}

std::size_t CandidateGraph::edge_count() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < size(); ++i) {
        for (double w : adjacency.row(i)) {
            count += w > 0.0 ? 1 : 0;
        }
    }
    return count;
}

namespace {

std::vector<const DataObject*> resolve(std::span<const std::string> candidates,
                                       const Corpus& corpus) {
    std::vector<const DataObject*> objects;
    objects.reserve(candidates.size());
    for (const auto& id : candidates) {
        const auto* object = corpus.find(id);
        if (object == nullptr) {
            throw ValidationError("candidate '" + id + "' is not in the corpus");
        }
        objects.push_back(object);
    }
    return objects;
}

CandidateGraph empty_graph(std::span<const std::string> candidates, ProximityScheme scheme) {
    return {{candidates.begin(), candidates.end()}, SquareMatrix(candidates.size()), scheme};
}

}  // namespace

CandidateGraph build_structural(std::span<const std::string> candidates, const Corpus& corpus) {
    const auto objects = resolve(candidates, corpus);
    auto graph = empty_graph(candidates, ProximityScheme::structural);
    std::unordered_map<std::string_view, std::size_t> node_of;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        node_of.emplace(objects[i]->id, i);
    }
    for (std::size_t i = 0; i < objects.size(); ++i) {
        for (const auto& target : objects[i]->structural_links) {
            auto it = node_of.find(target);
            if (it != node_of.end() && it->second != i) {
                graph.adjacency(i, it->second) = 1.0;
                graph.adjacency(it->second, i) = 1.0;
            }
        }
    }
    return graph;
}

CandidateGraph build_conceptual(std::span<const std::string> candidates, const Corpus& corpus) {
    const auto objects = resolve(candidates, corpus);
    const std::size_t n = objects.size();
    auto graph = empty_graph(candidates, ProximityScheme::conceptual);

    // entity -> nodes holding it; each node's entities counted once.
    std::unordered_map<std::string_view, std::vector<std::size_t>> holders;
    std::vector<std::size_t> unique_count(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::unordered_set<std::string_view> seen;
        for (const auto& entity : objects[i]->entities) {
            if (seen.insert(entity).second) {
                holders[entity].push_back(i);
            }
        }
        unique_count[i] = seen.size();
    }
    SquareMatrix shared(n);
    for (const auto& [entity, nodes] : holders) {
        for (auto i : nodes) {
            for (auto j : nodes) {
                if (i != j) {
                    shared(i, j) += 1.0;
                }
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && shared(i, j) > 0.0 && unique_count[j] > 0) {
                graph.adjacency(i, j) = shared(i, j) / static_cast<double>(unique_count[j]);
            }
        }
    }
    return graph;
}

CandidateGraph build_contextual(std::span<const std::string> candidates, const Corpus& corpus) {
    const auto objects = resolve(candidates, corpus);
    auto graph = empty_graph(candidates, ProximityScheme::contextual);
    std::unordered_map<std::string_view, std::vector<std::size_t>> by_doc;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        if (objects[i]->doc_id) {
            by_doc[*objects[i]->doc_id].push_back(i);
        }
    }
    for (const auto& [doc, nodes] : by_doc) {
        for (auto i : nodes) {
            for (auto j : nodes) {
                if (std::llabs(*objects[i]->chunk_id - *objects[j]->chunk_id) == 1) {
                    graph.adjacency(i, j) = 1.0;
                }
            }
        }
    }
    return graph;
}

CandidateGraph build_graph(std::span<const std::string> candidates, const Corpus& corpus,
                           ProximityScheme scheme) {
    switch (scheme) {
        case ProximityScheme::structural: return build_structural(candidates, corpus);
        case ProximityScheme::conceptual: return build_conceptual(candidates, corpus);
        case ProximityScheme::contextual: return build_contextual(candidates, corpus);
        case ProximityScheme::union_max: break;
    }
    auto graph = build_structural(candidates, corpus);
    graph.scheme = ProximityScheme::union_max;
    for (const auto& other :
         {build_conceptual(candidates, corpus), build_contextual(candidates, corpus)}) {
        for (std::size_t i = 0; i < graph.size(); ++i) {
            for (std::size_t j = 0; j < graph.size(); ++j) {
                graph.adjacency(i, j) = std::max(graph.adjacency(i, j), other.adjacency(i, j));
            }
        }
    }
    return graph;
}

nlohmann::json dump_graph(const CandidateGraph& graph) {
    nlohmann::json edges = nlohmann::json::array();
    for (std::size_t i = 0; i < graph.size(); ++i) {
        for (std::size_t j = 0; j < graph.size(); ++j) {
            if (double w = graph.adjacency(i, j); w != 0.0) {
                edges.push_back({i, j, w});
            }
        }
    }
    return {{"ids", graph.ids}, {"scheme", to_string(graph.scheme)}, {"edges", std::move(edges)}};
}

}  // namespace grapher
