#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "grapher/corpus.hpp"

namespace grapher::synthetic {

enum class Pattern { fk_triple, hub };

Pattern parse_pattern(std::string_view name);

struct Options {
    Pattern pattern = Pattern::fk_triple;
    std::uint64_t seed = 0;
    std::size_t queries = 100;
    std::size_t dim = 128;
    /// fk-triple only: share of queries whose second relevant table is already
    /// semantically close to the query.
    double easy_fraction = 0.3;
};

struct Dataset {
    Corpus corpus;
    std::vector<Query> queries;
    Qrels qrels;
    /// Object and query vectors, keyed by id.
    std::vector<std::pair<std::string, std::vector<float>>> vectors;
};

/// fk-triple: per query a small schema where the answer needs two FK-linked tables, one
/// close to the query embedding and one far from it, among unlinked mid-similarity
/// distractor tables.
///
/// hub: per query a star (hub + 20 leaves, all weakly matching) and one detached,
/// strongly matching relevant object.
Dataset generate(const Options& options);

/// Writes corpus.jsonl, queries.jsonl, qrels.tsv and vectors.jsonl under `dir`.
void write(const std::filesystem::path& dir, const Dataset& dataset);

}  // namespace grapher::synthetic
