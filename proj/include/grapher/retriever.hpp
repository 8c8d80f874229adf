#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "grapher/corpus.hpp"
#include "grapher/http.hpp"

namespace grapher {

/// Lowercases ASCII and splits on anything that is not an ASCII letter or digit. Bytes
/// >= 0x80 stay inside tokens so UTF-8 words are not torn apart. Empty tokens are dropped.
std::vector<std::string> tokenize(std::string_view text);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

class InvertedIndex {
public:
    struct Posting {
        std::uint32_t ordinal;
        std::uint32_t tf;
    };

    InvertedIndex() = default;
    explicit InvertedIndex(const Corpus& corpus, Bm25Params params = {});

    std::size_t size() const noexcept { return lengths_.size(); }
    std::size_t vocabulary_size() const noexcept { return postings_.size(); }
    double average_length() const noexcept { return average_length_; }
    std::uint32_t length(std::size_t ordinal) const { return lengths_.at(ordinal); }
    std::size_t document_frequency(std::string_view term) const;
    const Bm25Params& params() const noexcept { return params_; }

    /// ln(1 + (N - df + 0.5) / (df + 0.5)); non-negative for every df <= N.
    double idf(std::size_t df) const;

    /// Okapi BM25 of one object. Throws std::out_of_range for an unknown ordinal.
    double score(std::span<const std::string> query_tokens, std::size_t ordinal) const;

    /// BM25 of every object, accumulated through the posting lists.
    std::vector<double> score_all(std::span<const std::string> query_tokens) const;

private:
    std::vector<std::uint32_t> distinct_terms(std::span<const std::string> tokens) const;
    double term_weight(std::uint32_t term, std::uint32_t tf, std::uint32_t length) const;

    Bm25Params params_;
    std::unordered_map<std::string, std::uint32_t> vocabulary_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<std::uint32_t> lengths_;
    double average_length_ = 0.0;
};

// ---------------------------------------------------------------------------
// Embeddings

struct EmbedInput {
    std::string_view id;
    std::string_view text;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dimension() const = 0;
    /// One vector per input, in order. Throws on failure; determinism within a run is
    /// required.
    virtual std::vector<std::vector<float>> embed(std::span<const EmbedInput> inputs) = 0;

    std::vector<float> embed_one(std::string_view id, std::string_view text);
};

/// Vectors read from disk, looked up by object or query id.
class FileEmbeddings final : public EmbeddingProvider {
public:
    FileEmbeddings(std::unordered_map<std::string, std::vector<float>> vectors, std::size_t dim);

    /// JSONL `{"id", "vector"}`; a `.json` path is read as a manifest `{"dim", "ids",
    /// "data"?}` pointing at raw little-endian float32 rows (default: same stem, `.bin`).
    static FileEmbeddings load(const std::filesystem::path& path);

    std::size_t dimension() const override { return dim_; }
    std::vector<std::vector<float>> embed(std::span<const EmbedInput> inputs) override;
    bool contains(std::string_view id) const;
    std::size_t size() const noexcept { return vectors_.size(); }

private:
    std::unordered_map<std::string, std::vector<float>> vectors_;
    std::size_t dim_;
};

/// Hashed bag-of-words, L2-normalized. Texts with equal token multisets map to the same
/// vector, so cosine 1 is reachable exactly.
class HashEmbeddings final : public EmbeddingProvider {
public:
    explicit HashEmbeddings(std::size_t dim);
    std::size_t dimension() const override { return dim_; }
    std::vector<std::vector<float>> embed(std::span<const EmbedInput> inputs) override;

private:
    std::size_t dim_;
};

/// POST `{"texts": [...]}`, reply `{"vectors": [[...], ...]}`.
class RemoteEmbeddings final : public EmbeddingProvider {
public:
    RemoteEmbeddings(HttpPost post, std::size_t batch_size = 64);
    /// Endpoint from GRAPHER_EMBED_ENDPOINT.
    static RemoteEmbeddings from_env();

    std::size_t dimension() const override;
    std::vector<std::vector<float>> embed(std::span<const EmbedInput> inputs) override;

private:
    HttpPost post_;
    std::size_t batch_size_;
    std::optional<std::size_t> dim_;
};

void save_vectors_jsonl(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, std::vector<float>>>& rows);

/// Per-object dense vectors aligned with corpus ordinals. Entries may be absent; asking
/// for an absent one is an error, never a zero vector.
class VectorStore {
public:
    VectorStore() = default;
    VectorStore(std::size_t size, std::size_t dim);

    std::size_t size() const noexcept { return rows_.size(); }
    std::size_t dimension() const noexcept { return dim_; }
    void set(std::size_t ordinal, std::vector<float> vector);
    bool has(std::size_t ordinal) const { return !rows_.at(ordinal).empty(); }
    std::span<const float> at(std::size_t ordinal) const;

private:
    std::vector<std::vector<float>> rows_;
    std::size_t dim_ = 0;
};

double cosine(std::span<const float> a, std::span<const float> b);

// ---------------------------------------------------------------------------
// Hybrid retrieval

struct RetrieverConfig {
    enum class NormScope { corpus, pool };

    std::size_t n = 200;
    double w_bm25 = 0.3;
    double w_dense = 0.7;
    Bm25Params bm25;
    NormScope norm_scope = NormScope::corpus;

    /// Throws ConfigError unless n >= 1, weights non-negative and summing to 1.
    void check() const;
};

struct Candidate {
    std::string id;
    double score = 0.0;
    /// Normalized components: score == w_bm25 * bm25 + w_dense * dense.
    double bm25 = 0.0;
    double dense = 0.0;
};

struct ScoredCandidateList {
    std::string query_id;
    std::vector<Candidate> candidates;
};

struct BuiltIndex {
    InvertedIndex index;
    VectorStore store;
};

/// Tokenizes and embeds every object. Provider failure aborts naming the object.
BuiltIndex build_index(const Corpus& corpus, EmbeddingProvider& provider,
                       const RetrieverConfig& config = {});

/// Min-max scaling to [0, 1]; a constant family maps to all zeros.
std::vector<double> min_max_normalize(std::span<const double> values);

ScoredCandidateList hybrid_retrieve(const Query& query, const Corpus& corpus,
                                    const InvertedIndex& index, const VectorStore& store,
                                    std::span<const float> query_vector,
                                    const RetrieverConfig& config = {});

ScoredCandidateList hybrid_retrieve(const Query& query, const Corpus& corpus,
                                    const InvertedIndex& index, const VectorStore& store,
                                    EmbeddingProvider& provider,
                                    const RetrieverConfig& config = {});

void sort_candidates(std::vector<Candidate>& candidates);

nlohmann::json to_json(const ScoredCandidateList& list);
ScoredCandidateList scored_list_from_json(const nlohmann::json& j);

}  // namespace grapher
