#include "grapher/retriever.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

#include "grapher/errors.hpp"
#include "grapher/io.hpp"

namespace grapher {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char raw : text) {
        auto c = static_cast<unsigned char>(raw);
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
            current.push_back(raw);
        } else if (c >= 'A' && c <= 'Z') {
            current.push_back(static_cast<char>(c - 'A' + 'a'));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

InvertedIndex::InvertedIndex(const Corpus& corpus, Bm25Params params) : params_(params) {
    lengths_.reserve(corpus.size());
    std::unordered_map<std::uint32_t, std::uint32_t> counts;
    for (std::size_t ordinal = 0; ordinal < corpus.size(); ++ordinal) {
        auto tokens = tokenize(corpus.at(ordinal).content);
        counts.clear();
        for (const auto& token : tokens) {
            auto [it, inserted] =
                vocabulary_.try_emplace(token, static_cast<std::uint32_t>(postings_.size()));
            if (inserted) {
                postings_.emplace_back();
            }
            ++counts[it->second];
        }
        // Posting lists stay sorted by ordinal because ordinals are visited in order.
        std::vector<std::pair<std::uint32_t, std::uint32_t>> sorted(counts.begin(), counts.end());
        std::sort(sorted.begin(), sorted.end());
        for (auto [term, tf] : sorted) {
            postings_[term].push_back({static_cast<std::uint32_t>(ordinal), tf});
        }
        lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    }
    if (!lengths_.empty()) {
        double total = std::accumulate(lengths_.begin(), lengths_.end(), 0.0);
        average_length_ = total / static_cast<double>(lengths_.size());
    }
}

std::size_t InvertedIndex::document_frequency(std::string_view term) const {
    auto it = vocabulary_.find(std::string(term));
    return it == vocabulary_.end() ? 0 : postings_[it->second].size();
}

double InvertedIndex::idf(std::size_t df) const {
    const double n = static_cast<double>(size());
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

std::vector<std::uint32_t> InvertedIndex::distinct_terms(
    std::span<const std::string> tokens) const {
    std::vector<std::uint32_t> terms;
    for (const auto& token : tokens) {
        auto it = vocabulary_.find(token);
        if (it != vocabulary_.end() &&
            std::find(terms.begin(), terms.end(), it->second) == terms.end()) {
            terms.push_back(it->second);
        }
    }
    return terms;
}

double InvertedIndex::term_weight(std::uint32_t term, std::uint32_t tf,
                                  std::uint32_t length) const {
    const double k1 = params_.k1;
    const double b = params_.b;
    const double norm = average_length_ > 0.0 ? length / average_length_ : 0.0;
    const double f = static_cast<double>(tf);
    return idf(postings_[term].size()) * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * norm));
}

double InvertedIndex::score(std::span<const std::string> query_tokens, std::size_t ordinal) const {
    if (ordinal >= size()) {
        throw std::out_of_range("object ordinal " + std::to_string(ordinal) + " out of range");
    }
    double total = 0.0;
    for (auto term : distinct_terms(query_tokens)) {
        const auto& list = postings_[term];
        auto it = std::lower_bound(
            list.begin(), list.end(), ordinal,
            [](const Posting& p, std::size_t value) { return p.ordinal < value; });
        if (it != list.end() && it->ordinal == ordinal) {
            total += term_weight(term, it->tf, lengths_[ordinal]);
        }
    }
    return total;
}

std::vector<double> InvertedIndex::score_all(std::span<const std::string> query_tokens) const {
    std::vector<double> scores(size(), 0.0);
    for (auto term : distinct_terms(query_tokens)) {
        for (const auto& posting : postings_[term]) {
            scores[posting.ordinal] += term_weight(term, posting.tf, lengths_[posting.ordinal]);
        }
    }
    return scores;
}

// ---------------------------------------------------------------------------

std::vector<float> EmbeddingProvider::embed_one(std::string_view id, std::string_view text) {
    EmbedInput input{id, text};
    auto out = embed(std::span<const EmbedInput>(&input, 1));
    if (out.size() != 1) {
        throw DimensionError("provider returned " + std::to_string(out.size()) +
                             " vectors for one input");
    }
    return std::move(out.front());
}

FileEmbeddings::FileEmbeddings(std::unordered_map<std::string, std::vector<float>> vectors,
                               std::size_t dim)
    : vectors_(std::move(vectors)), dim_(dim) {
    for (const auto& [id, v] : vectors_) {
        if (v.size() != dim_) {
            throw DimensionError("vector for '" + id + "' has dimension " +
                                 std::to_string(v.size()) + ", expected " +
                                 std::to_string(dim_));
        }
    }
}

namespace {

FileEmbeddings load_binary_manifest(const std::filesystem::path& manifest_path) {
    auto manifest = nlohmann::json::parse(io::read_file(manifest_path), nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object() || !manifest.contains("dim") ||
        !manifest.contains("ids")) {
        throw ParseError(manifest_path.string(), 0, "manifest requires 'dim' and 'ids'");
    }
    const auto dim = manifest["dim"].get<std::size_t>();
    const auto ids = manifest["ids"].get<std::vector<std::string>>();
    auto data_path = manifest_path;
    data_path.replace_extension(".bin");
    if (manifest.contains("data")) {
        data_path = manifest_path.parent_path() / manifest["data"].get<std::string>();
    }
    const auto bytes = io::read_file(data_path);
    if (bytes.size() != ids.size() * dim * sizeof(float)) {
        throw DimensionError(data_path.string() + ": expected " +
                             std::to_string(ids.size() * dim * sizeof(float)) + " bytes, found " +
                             std::to_string(bytes.size()));
    }
    std::unordered_map<std::string, std::vector<float>> vectors;
    for (std::size_t row = 0; row < ids.size(); ++row) {
        std::vector<float> v(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            std::uint32_t word;
            std::memcpy(&word, bytes.data() + (row * dim + k) * sizeof(float), sizeof(word));
            if constexpr (std::endian::native == std::endian::big) {
                word = __builtin_bswap32(word);
            }
            v[k] = std::bit_cast<float>(word);
        }
        vectors.emplace(ids[row], std::move(v));
    }
    return FileEmbeddings(std::move(vectors), dim);
}

}  // namespace

FileEmbeddings FileEmbeddings::load(const std::filesystem::path& path) {
    if (path.extension() == ".json") {
        return load_binary_manifest(path);
    }
    auto in = io::open_input(path);
    const auto source = path.string();
    std::unordered_map<std::string, std::vector<float>> vectors;
    std::optional<std::size_t> dim;
    io::for_each_line(in, [&](std::size_t number, std::string_view line) {
        auto j = io::parse_json_line(line, source, number);
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string() ||
            !j.contains("vector") || !j["vector"].is_array()) {
            throw ParseError(source, number, "vector line requires 'id' and 'vector'");
        }
        auto v = j["vector"].get<std::vector<float>>();
        if (dim && v.size() != *dim) {
            throw DimensionError(source + ":" + std::to_string(number) + ": dimension " +
                                 std::to_string(v.size()) + " differs from " +
                                 std::to_string(*dim));
        }
        dim = v.size();
        vectors[j["id"].get<std::string>()] = std::move(v);
    });
    return FileEmbeddings(std::move(vectors), dim.value_or(0));
}

std::vector<std::vector<float>> FileEmbeddings::embed(std::span<const EmbedInput> inputs) {
    std::vector<std::vector<float>> out;
    out.reserve(inputs.size());
    for (const auto& input : inputs) {
        auto it = vectors_.find(std::string(input.id));
        if (it == vectors_.end()) {
            throw MissingInputError("no vector for id '" + std::string(input.id) + "'");
        }
        out.push_back(it->second);
    }
    return out;
}

bool FileEmbeddings::contains(std::string_view id) const {
    return vectors_.contains(std::string(id));
}

HashEmbeddings::HashEmbeddings(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) {
        throw ConfigError("hash embedding dimension must be >= 1");
    }
}

std::vector<std::vector<float>> HashEmbeddings::embed(std::span<const EmbedInput> inputs) {
    std::vector<std::vector<float>> out;
    out.reserve(inputs.size());
    const std::hash<std::string_view> hasher;
    for (const auto& input : inputs) {
        std::vector<double> acc(dim_, 0.0);
        for (const auto& token : tokenize(input.text)) {
            acc[hasher(token) % dim_] += 1.0;
        }
        double norm = 0.0;
        for (double x : acc) {
            norm += x * x;
        }
        norm = std::sqrt(norm);
        std::vector<float> v(dim_, 0.0f);
        if (norm > 0.0) {
            for (std::size_t k = 0; k < dim_; ++k) {
                v[k] = static_cast<float>(acc[k] / norm);
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

RemoteEmbeddings::RemoteEmbeddings(HttpPost post, std::size_t batch_size)
    : post_(std::move(post)), batch_size_(std::max<std::size_t>(1, batch_size)) {}

RemoteEmbeddings RemoteEmbeddings::from_env() {
    auto endpoint = env_or_empty("GRAPHER_EMBED_ENDPOINT");
    if (endpoint.empty()) {
        throw ConfigError("embedding endpoint not configured (set GRAPHER_EMBED_ENDPOINT)");
    }
    return RemoteEmbeddings(make_http_post(endpoint));
}

std::size_t RemoteEmbeddings::dimension() const { return dim_.value_or(0); }

std::vector<std::vector<float>> RemoteEmbeddings::embed(std::span<const EmbedInput> inputs) {
    std::vector<std::vector<float>> out;
    out.reserve(inputs.size());
    for (std::size_t start = 0; start < inputs.size(); start += batch_size_) {
        auto batch = inputs.subspan(start, std::min(batch_size_, inputs.size() - start));
        nlohmann::json texts = nlohmann::json::array();
        for (const auto& input : batch) {
            texts.push_back(input.text);
        }
        auto reply = post_(nlohmann::json{{"texts", texts}}.dump());
        if (reply.status < 200 || reply.status >= 300) {
            throw TransportError("embedding endpoint returned HTTP " +
                                 std::to_string(reply.status));
        }
        auto j = nlohmann::json::parse(reply.body, nullptr, false);
        if (j.is_discarded() || !j.contains("vectors") || !j["vectors"].is_array() ||
            j["vectors"].size() != batch.size()) {
            throw TransportError("embedding reply must carry one vector per text");
        }
        for (const auto& row : j["vectors"]) {
            auto v = row.get<std::vector<float>>();
            if (dim_ && v.size() != *dim_) {
                throw DimensionError("embedding endpoint changed dimension");
            }
            dim_ = v.size();
            out.push_back(std::move(v));
        }
    }
    return out;
}

void save_vectors_jsonl(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
    io::write_atomic(path, [&](std::ostream& out) {
        for (const auto& [id, v] : rows) {
            out << nlohmann::json{{"id", id}, {"vector", v}}.dump() << '\n';
        }
    });
}

VectorStore::VectorStore(std::size_t size, std::size_t dim) : rows_(size), dim_(dim) {}

void VectorStore::set(std::size_t ordinal, std::vector<float> vector) {
    if (vector.size() != dim_) {
        throw DimensionError("vector of dimension " + std::to_string(vector.size()) +
                             " in a store of dimension " + std::to_string(dim_));
    }
    rows_.at(ordinal) = std::move(vector);
}

std::span<const float> VectorStore::at(std::size_t ordinal) const {
    const auto& row = rows_.at(ordinal);
    if (row.empty()) {
        throw MissingInputError("no vector stored for ordinal " + std::to_string(ordinal));
    }
    return row;
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw DimensionError("cosine of vectors with dimensions " + std::to_string(a.size()) +
                             " and " + std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += static_cast<double>(a[k]) * b[k];
        na += static_cast<double>(a[k]) * a[k];
        nb += static_cast<double>(b[k]) * b[k];
    }
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------

void RetrieverConfig::check() const {
    if (n < 1) {
        throw ConfigError("top-n cutoff must be >= 1");
    }
    if (w_bm25 < 0.0 || w_dense < 0.0 || std::abs(w_bm25 + w_dense - 1.0) > 1e-9) {
        throw ConfigError("fusion weights must be non-negative and sum to 1");
    }
    if (bm25.k1 < 0.0 || bm25.b < 0.0 || bm25.b > 1.0) {
        throw ConfigError("BM25 requires k1 >= 0 and b in [0, 1]");
    }
}

BuiltIndex build_index(const Corpus& corpus, EmbeddingProvider& provider,
                       const RetrieverConfig& config) {
    config.check();
    if (corpus.empty()) {
        throw ValidationError("cannot index an empty corpus");
    }
    BuiltIndex built{InvertedIndex(corpus, config.bm25), {}};
    std::vector<EmbedInput> inputs;
    inputs.reserve(corpus.size());
    for (const auto& object : corpus) {
        inputs.push_back({object.id, object.content});
    }
    std::vector<std::vector<float>> vectors;
    try {
        vectors = provider.embed(inputs);
    } catch (const std::exception&) {
        // Retry one by one to name the failing object.
        vectors.clear();
        for (const auto& input : inputs) {
            try {
                vectors.push_back(provider.embed_one(input.id, input.text));
            } catch (const std::exception& e) {
                throw Error("embedding failed for object '" + std::string(input.id) +
                            "': " + e.what());
            }
        }
    }
    if (vectors.size() != corpus.size()) {
        throw DimensionError("provider returned " + std::to_string(vectors.size()) +
                             " vectors for " + std::to_string(corpus.size()) + " objects");
    }
    const std::size_t dim = vectors.front().size();
    built.store = VectorStore(corpus.size(), dim);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].size() != dim) {
            throw DimensionError("object '" + corpus.at(i).id + "' embedded with dimension " +
                                 std::to_string(vectors[i].size()) + ", expected " +
                                 std::to_string(dim));
        }
        built.store.set(i, std::move(vectors[i]));
    }
    return built;
}

std::vector<double> min_max_normalize(std::span<const double> values) {
    std::vector<double> out(values.size(), 0.0);
    if (values.empty()) {
        return out;
    }
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) {
        return out;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::clamp((values[i] - *lo) / range, 0.0, 1.0);
    }
    return out;
}

void sort_candidates(std::vector<Candidate>& candidates) {
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.id < b.id;
    });
}

namespace {

std::vector<std::size_t> top_ordinals(const std::vector<double>& scores, std::size_t n) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    n = std::min(n, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                      });
    order.resize(n);
    return order;
}

}  // namespace

ScoredCandidateList hybrid_retrieve(const Query& query, const Corpus& corpus,
                                    const InvertedIndex& index, const VectorStore& store,
                                    std::span<const float> query_vector,
                                    const RetrieverConfig& config) {
    config.check();
    const std::size_t n_objects = corpus.size();
    if (index.size() != n_objects || store.size() != n_objects) {
        throw DimensionError("index, vector store and corpus sizes differ");
    }
    const auto tokens = tokenize(query.text);
    const auto bm25 = index.score_all(tokens);
    std::vector<double> dense(n_objects);
    for (std::size_t i = 0; i < n_objects; ++i) {
        if (!store.has(i)) {
            throw MissingInputError("no vector for object '" + corpus.at(i).id + "'");
        }
        dense[i] = cosine(query_vector, store.at(i));
    }

    std::vector<std::size_t> pool;
    if (config.norm_scope == RetrieverConfig::NormScope::pool) {
        pool = top_ordinals(bm25, config.n);
        for (auto i : top_ordinals(dense, config.n)) {
            if (std::find(pool.begin(), pool.end(), i) == pool.end()) {
                pool.push_back(i);
            }
        }
        std::sort(pool.begin(), pool.end());
    } else {
        pool.resize(n_objects);
        std::iota(pool.begin(), pool.end(), 0);
    }

    std::vector<double> pool_bm25, pool_dense;
    pool_bm25.reserve(pool.size());
    pool_dense.reserve(pool.size());
    for (auto i : pool) {
        pool_bm25.push_back(bm25[i]);
        pool_dense.push_back(dense[i]);
    }
    const auto norm_bm25 = min_max_normalize(pool_bm25);
    const auto norm_dense = min_max_normalize(pool_dense);

    ScoredCandidateList list;
    list.query_id = query.id;
    list.candidates.reserve(pool.size());
    for (std::size_t p = 0; p < pool.size(); ++p) {
        Candidate c;
        c.id = corpus.at(pool[p]).id;
        c.bm25 = norm_bm25[p];
        c.dense = norm_dense[p];
        c.score = config.w_bm25 * c.bm25 + config.w_dense * c.dense;
        list.candidates.push_back(std::move(c));
    }
    sort_candidates(list.candidates);
    if (list.candidates.size() > config.n) {
        list.candidates.resize(config.n);
    }
    return list;
}

ScoredCandidateList hybrid_retrieve(const Query& query, const Corpus& corpus,
                                    const InvertedIndex& index, const VectorStore& store,
                                    EmbeddingProvider& provider, const RetrieverConfig& config) {
    auto query_vector = provider.embed_one(query.id, query.text);
    if (query_vector.size() != store.dimension()) {
        throw DimensionError("query embedding dimension " + std::to_string(query_vector.size()) +
                             " != store dimension " + std::to_string(store.dimension()));
    }
    return hybrid_retrieve(query, corpus, index, store, query_vector, config);
}

nlohmann::json to_json(const ScoredCandidateList& list) {
    nlohmann::json candidates = nlohmann::json::array();
    for (const auto& c : list.candidates) {
        candidates.push_back({{"id", c.id}, {"score", c.score}, {"bm25", c.bm25}, {"dense", c.dense}});
    }
    return {{"query_id", list.query_id}, {"candidates", std::move(candidates)}};
}

ScoredCandidateList scored_list_from_json(const nlohmann::json& j) {
    ScoredCandidateList list;
    list.query_id = j.at("query_id").get<std::string>();
    for (const auto& c : j.at("candidates")) {
        list.candidates.push_back({c.at("id").get<std::string>(), c.at("score").get<double>(),
                                   c.value("bm25", 0.0), c.value("dense", 0.0)});
    }
    return list;
}

}  // namespace grapher
