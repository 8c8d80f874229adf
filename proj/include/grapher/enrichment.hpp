#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "grapher/corpus.hpp"
#include "grapher/http.hpp"

namespace grapher {

// ---------------------------------------------------------------------------
// Structural proximity

using LinkPair = std::pair<std::string, std::string>;

/// Reads a `source_id<TAB>target_id` table.
std::vector<LinkPair> load_links(const std::filesystem::path& path);
std::vector<LinkPair> parse_links(std::istream& in, const std::string& source = "<stream>");

/// Adds every pair in both directions. Self-pairs are dropped; an unknown id on either side
/// throws ValidationError naming the pair.
Corpus enrich_structural(Corpus corpus, const std::vector<LinkPair>& links);

// ---------------------------------------------------------------------------
// Conceptual proximity

class EntityExtractor {
public:
    virtual ~EntityExtractor() = default;
    /// Entities found in `object`. May throw TransportError; callers treat that as a
    /// per-object failure.
    virtual std::vector<std::string> extract(const DataObject& object) = 0;
};

/// id -> entities table loaded from JSONL `{"id": ..., "entities": [...]}`.
class FixtureExtractor final : public EntityExtractor {
public:
    explicit FixtureExtractor(std::map<std::string, std::vector<std::string>> table);
    FixtureExtractor(FixtureExtractor&& other) noexcept;
    static FixtureExtractor load(const std::filesystem::path& path);
    static FixtureExtractor parse(std::istream& in, const std::string& source = "<stream>");

    std::vector<std::string> extract(const DataObject& object) override;

    /// Ids requested but absent from the table.
    std::vector<std::string> misses() const;

private:
    std::map<std::string, std::vector<std::string>> table_;
    mutable std::mutex mutex_;
    std::set<std::string> misses_;
};

/// Named-entity prompt sent to the LLM; `{content}` is replaced by the object text.
extern const std::string_view kEntityPromptTemplate;

std::string render_entity_prompt(std::string_view content);

/// Recovers a list of strings from an LLM reply: a JSON array, a JSON object wrapping the
/// reply text, or the first balanced `[...]` span. Returns nullopt when nothing parses.
std::optional<std::vector<std::string>> parse_entity_reply(std::string_view reply);

struct RemoteLlmConfig {
    std::string endpoint;
    std::string model = "gpt-4o";
    std::string token;
    int retries = 3;
    std::chrono::milliseconds initial_backoff{1000};

    /// Endpoint and token from GRAPHER_LLM_ENDPOINT / GRAPHER_LLM_TOKEN.
    static RemoteLlmConfig from_env();
};

class RemoteLlmExtractor final : public EntityExtractor {
public:
    explicit RemoteLlmExtractor(RemoteLlmConfig config);
    /// Uses `post` instead of a real HTTP client.
    RemoteLlmExtractor(RemoteLlmConfig config, HttpPost post);

    std::vector<std::string> extract(const DataObject& object) override;

private:
    RemoteLlmConfig config_;
    HttpPost post_;
};

struct ConceptualOptions {
    /// Lowercase and collapse whitespace before dedup. Off: entities match exactly.
    bool normalize = false;
    unsigned threads = 1;
};

struct ConceptualReport {
    Corpus corpus;
    std::size_t extracted = 0;
    std::size_t skipped = 0;
    /// (object id, reason) for objects left unenriched.
    std::vector<std::pair<std::string, std::string>> failures;
};

std::string normalize_entity(std::string_view entity);

/// Case-sensitive, order-preserving dedup (after optional normalization).
std::vector<std::string> dedup_entities(const std::vector<std::string>& entities,
                                        bool normalize = false);

/// Fills `entities` of every object that has none; pre-populated objects are left alone.
ConceptualReport enrich_conceptual(Corpus corpus, EntityExtractor& extractor,
                                   const ConceptualOptions& options = {});

// ---------------------------------------------------------------------------
// Contextual proximity

struct ChunkingConfig {
    enum class Mode { split, prechunked };
    Mode mode = Mode::split;
    std::size_t window = 128;
};

struct SourceDocument {
    std::string doc_id;
    std::string text;
    /// Required in pre-chunked mode, ignored in split mode.
    std::optional<std::int64_t> chunk_id;
};

/// JSONL `{"doc_id", "text", "chunk_id"?}`.
std::vector<SourceDocument> load_documents(const std::filesystem::path& path);

/// Emits chunk objects with id `<doc_id>#<chunk_id>`.
std::vector<DataObject> enrich_contextual(const std::vector<SourceDocument>& documents,
                                          const ChunkingConfig& config);

}  // namespace grapher
