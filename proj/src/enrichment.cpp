#include "grapher/enrichment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "grapher/errors.hpp"
#include "grapher/io.hpp"

namespace grapher {

std::vector<LinkPair> parse_links(std::istream& in, const std::string& source) {
    std::vector<LinkPair> links;
    io::for_each_line(in, [&](std::size_t number, std::string_view line) {
        auto tab = line.find('\t');
        if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos ||
            tab == 0 || tab + 1 == line.size()) {
            throw ParseError(source, number, "expected source_id<TAB>target_id");
        }
        links.emplace_back(std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)));
    });
    return links;
}

std::vector<LinkPair> load_links(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    return parse_links(in, path.string());
}

Corpus enrich_structural(Corpus corpus, const std::vector<LinkPair>& links) {
    for (const auto& [source, target] : links) {
        auto from = corpus.ordinal_of(source);
        auto to = corpus.ordinal_of(target);
        if (!from || !to) {
            throw ValidationError("link (" + source + ", " + target + ") references an unknown id");
        }
        if (*from == *to) {
            continue;
        }
        corpus.mutable_at(*from).add_link(target);
        corpus.mutable_at(*to).add_link(source);
    }
    return corpus;
}

// ---------------------------------------------------------------------------

FixtureExtractor::FixtureExtractor(std::map<std::string, std::vector<std::string>> table)
    : table_(std::move(table)) {}

FixtureExtractor::FixtureExtractor(FixtureExtractor&& other) noexcept
    : table_(std::move(other.table_)), misses_(std::move(other.misses_)) {}

FixtureExtractor FixtureExtractor::parse(std::istream& in, const std::string& source) {
    std::map<std::string, std::vector<std::string>> table;
    io::for_each_line(in, [&](std::size_t number, std::string_view line) {
        auto j = io::parse_json_line(line, source, number);
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string() ||
            !j.contains("entities") || !j["entities"].is_array()) {
            throw ParseError(source, number, "fixture line requires 'id' and 'entities'");
        }
        std::vector<std::string> entities;
        for (const auto& e : j["entities"]) {
            if (!e.is_string()) {
                throw ParseError(source, number, "entities must be strings");
            }
            entities.push_back(e.get<std::string>());
        }
        table[j["id"].get<std::string>()] = std::move(entities);
    });
    return FixtureExtractor(std::move(table));
}

FixtureExtractor FixtureExtractor::load(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    return parse(in, path.string());
}

std::vector<std::string> FixtureExtractor::extract(const DataObject& object) {
    auto it = table_.find(object.id);
    if (it == table_.end()) {
        std::lock_guard lock(mutex_);
        misses_.insert(object.id);
        return {};
    }
    return it->second;
}

std::vector<std::string> FixtureExtractor::misses() const {
    std::lock_guard lock(mutex_);
    return {misses_.begin(), misses_.end()};
}

// ---------------------------------------------------------------------------

const std::string_view kEntityPromptTemplate =
    R"(Identify the key entities (people, organizations, locations, dates, etc.) from the following paragraph.
Return the result as a valid Python list of strings, with no explanations, only the list.

Example:
Text:
"Barack Obama was born in Honolulu, Hawaii, and served as the 44th President of the United States."
Output:
["Barack Obama", "Honolulu", "Hawaii", "United States", "44th President"]

Text:
{content}
Output:
)";

std::string render_entity_prompt(std::string_view content) {
    std::string prompt(kEntityPromptTemplate);
    static constexpr std::string_view placeholder = "{content}";
    auto at = prompt.find(placeholder);
    prompt.replace(at, placeholder.size(), content);
    return prompt;
}

namespace {

std::optional<std::vector<std::string>> as_string_list(const nlohmann::json& j) {
    if (!j.is_array()) {
        return std::nullopt;
    }
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string()) {
            return std::nullopt;
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

// First '[' and its matching ']', skipping brackets inside double-quoted strings.
std::optional<std::string_view> first_bracket_span(std::string_view text) {
    auto start = text.find('[');
    if (start == std::string_view::npos) {
        return std::nullopt;
    }
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '[') {
            ++depth;
        } else if (c == ']' && --depth == 0) {
            return text.substr(start, i - start + 1);
        }
    }
    return std::nullopt;
}

std::optional<std::string> wrapped_reply_text(const nlohmann::json& j) {
    for (const char* key : {"response", "output", "text", "content"}) {
        if (auto it = j.find(key); it != j.end() && it->is_string()) {
            return it->get<std::string>();
        }
    }
    if (auto choices = j.find("choices"); choices != j.end() && choices->is_array() &&
                                          !choices->empty()) {
        const auto& first = (*choices)[0];
        if (first.contains("message") && first["message"].contains("content") &&
            first["message"]["content"].is_string()) {
            return first["message"]["content"].get<std::string>();
        }
        if (first.contains("text") && first["text"].is_string()) {
            return first["text"].get<std::string>();
        }
    }
    return std::nullopt;
}

}  // namespace

std::optional<std::vector<std::string>> parse_entity_reply(std::string_view reply) {
    auto whole = nlohmann::json::parse(reply, nullptr, false);
    if (!whole.is_discarded()) {
        if (auto list = as_string_list(whole)) {
            return list;
        }
        if (whole.is_object()) {
            if (auto inner = wrapped_reply_text(whole)) {
                return parse_entity_reply(*inner);
            }
        }
        if (whole.is_string()) {
            return parse_entity_reply(whole.get<std::string>());
        }
    }
    if (auto span = first_bracket_span(reply)) {
        auto j = nlohmann::json::parse(*span, nullptr, false);
        if (!j.is_discarded()) {
            return as_string_list(j);
        }
    }
    return std::nullopt;
}

RemoteLlmConfig RemoteLlmConfig::from_env() {
    RemoteLlmConfig config;
    config.endpoint = env_or_empty("GRAPHER_LLM_ENDPOINT");
    config.token = env_or_empty("GRAPHER_LLM_TOKEN");
    return config;
}

RemoteLlmExtractor::RemoteLlmExtractor(RemoteLlmConfig config)
    : config_(std::move(config)) {
    if (config_.endpoint.empty()) {
        throw ConfigError("LLM endpoint not configured (set GRAPHER_LLM_ENDPOINT)");
    }
    post_ = make_http_post(config_.endpoint, config_.token);
}

RemoteLlmExtractor::RemoteLlmExtractor(RemoteLlmConfig config, HttpPost post)
    : config_(std::move(config)), post_(std::move(post)) {}

std::vector<std::string> RemoteLlmExtractor::extract(const DataObject& object) {
    const auto body =
        nlohmann::json{{"model", config_.model}, {"prompt", render_entity_prompt(object.content)}}
            .dump();
    auto backoff = config_.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        HttpReply reply;
        try {
            reply = post_(body);
        } catch (const TransportError& e) {
            last_error = e.what();
            continue;
        }
        if (reply.status < 200 || reply.status >= 300) {
            last_error = "HTTP status " + std::to_string(reply.status);
            continue;
        }
        if (auto entities = parse_entity_reply(reply.body)) {
            return *entities;
        }
        // A well-formed reply without a list will not improve on retry.
        throw TransportError("unparseable entity reply for '" + object.id + "'");
    }
    throw TransportError("entity extraction for '" + object.id + "' failed after " +
                         std::to_string(config_.retries + 1) + " attempts: " + last_error);
}

// ---------------------------------------------------------------------------

std::string normalize_entity(std::string_view entity) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : entity) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::vector<std::string> dedup_entities(const std::vector<std::string>& entities, bool normalize) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& raw : entities) {
        auto entity = normalize ? normalize_entity(raw) : raw;
        if (entity.empty()) {
            continue;
        }
        if (seen.insert(entity).second) {
            out.push_back(std::move(entity));
        }
    }
    return out;
}

ConceptualReport enrich_conceptual(Corpus corpus, EntityExtractor& extractor,
                                   const ConceptualOptions& options) {
    const std::size_t n = corpus.size();
    std::vector<std::optional<std::vector<std::string>>> results(n);
    std::vector<std::string> errors(n);
    std::vector<char> pending(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        pending[i] = corpus.at(i).entities.empty() ? 1 : 0;
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            if (!pending[i]) {
                continue;
            }
            try {
                results[i] = dedup_entities(extractor.extract(corpus.at(i)), options.normalize);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, n ? n : 1));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }

    ConceptualReport report;
    for (std::size_t i = 0; i < n; ++i) {
        if (!pending[i]) {
            ++report.skipped;
        } else if (results[i]) {
            corpus.mutable_at(i).entities = std::move(*results[i]);
            ++report.extracted;
        } else {
            report.failures.emplace_back(corpus.at(i).id, errors[i]);
        }
    }
    report.corpus = std::move(corpus);
    return report;
}

// ---------------------------------------------------------------------------

std::vector<SourceDocument> load_documents(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    std::vector<SourceDocument> documents;
    const auto source = path.string();
    io::for_each_line(in, [&](std::size_t number, std::string_view line) {
        auto j = io::parse_json_line(line, source, number);
        if (!j.is_object() || !j.contains("doc_id") || !j["doc_id"].is_string() ||
            !j.contains("text") || !j["text"].is_string()) {
            throw ParseError(source, number, "document requires string 'doc_id' and 'text'");
        }
        SourceDocument doc{j["doc_id"].get<std::string>(), j["text"].get<std::string>(), {}};
        if (auto c = j.find("chunk_id"); c != j.end() && !c->is_null()) {
            if (!c->is_number_integer()) {
                throw ParseError(source, number, "chunk_id must be an integer");
            }
            doc.chunk_id = c->get<std::int64_t>();
        }
        documents.push_back(std::move(doc));
    });
    return documents;
}

namespace {

DataObject make_chunk(const std::string& doc_id, std::int64_t chunk_id, std::string content) {
    DataObject chunk;
    chunk.id = doc_id + "#" + std::to_string(chunk_id);
    chunk.content = std::move(content);
    chunk.doc_id = doc_id;
    chunk.chunk_id = chunk_id;
    return chunk;
}

}  // namespace

std::vector<DataObject> enrich_contextual(const std::vector<SourceDocument>& documents,
                                          const ChunkingConfig& config) {
    std::vector<DataObject> chunks;
    if (config.mode == ChunkingConfig::Mode::prechunked) {
        std::set<std::pair<std::string, std::int64_t>> seen;
        for (const auto& doc : documents) {
            if (doc.doc_id.empty()) {
                throw ValidationError("pre-chunked input requires a non-empty doc_id");
            }
            if (!doc.chunk_id || *doc.chunk_id < 0) {
                throw ValidationError("pre-chunked input '" + doc.doc_id +
                                      "' requires a non-negative chunk_id");
            }
            if (!seen.emplace(doc.doc_id, *doc.chunk_id).second) {
                throw ValidationError("duplicate chunk (" + doc.doc_id + ", " +
                                      std::to_string(*doc.chunk_id) + ")");
            }
            chunks.push_back(make_chunk(doc.doc_id, *doc.chunk_id, doc.text));
        }
        return chunks;
    }

    if (config.window < 1) {
        throw ConfigError("chunking window must be >= 1");
    }
    for (const auto& doc : documents) {
        std::istringstream tokens(doc.text);
        std::string token;
        std::string content;
        std::size_t in_window = 0;
        std::int64_t chunk_id = 0;
        while (tokens >> token) {
            if (in_window > 0) {
                content.push_back(' ');
            }
            content += token;
            if (++in_window == config.window) {
                chunks.push_back(make_chunk(doc.doc_id, chunk_id++, std::move(content)));
                content.clear();
                in_window = 0;
            }
        }
        if (in_window > 0) {
            chunks.push_back(make_chunk(doc.doc_id, chunk_id, std::move(content)));
        }
    }
    return chunks;
}

}  // namespace grapher
