#include "grapher/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "grapher/errors.hpp"
#include "grapher/io.hpp"

namespace grapher {

namespace {

constexpr std::string_view kKnownFields[] = {"id",       "content", "structural_links",
                                             "entities", "doc_id",  "chunk_id"};

bool is_known_field(std::string_view key) {
    return std::find(std::begin(kKnownFields), std::end(kKnownFields), key) !=
           std::end(kKnownFields);
}

std::vector<std::string> string_array(const nlohmann::json& j, std::string_view field) {
    if (!j.is_array()) {
        throw ValidationError(std::string(field) + " must be an array of strings");
    }
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string()) {
            throw ValidationError(std::string(field) + " must be an array of strings");
        }
        auto value = item.get<std::string>();
        if (std::find(out.begin(), out.end(), value) == out.end()) {
            out.push_back(std::move(value));
        }
    }
    return out;
}

}  // namespace

bool DataObject::add_link(const std::string& target) {
    if (target == id || std::find(structural_links.begin(), structural_links.end(), target) !=
                            structural_links.end()) {
        return false;
    }
    structural_links.push_back(target);
    return true;
}

bool DataObject::add_entity(const std::string& entity) {
    if (std::find(entities.begin(), entities.end(), entity) != entities.end()) {
        return false;
    }
    entities.push_back(entity);
    return true;
}

void check_object(const DataObject& object) {
    if (object.id.empty()) {
        throw ValidationError("data object id must be non-empty");
    }
    if (object.doc_id.has_value() != object.chunk_id.has_value()) {
        throw ValidationError("object '" + object.id +
                              "': chunk_id must be present exactly when doc_id is present");
    }
    if (object.chunk_id && *object.chunk_id < 0) {
        throw ValidationError("object '" + object.id + "': chunk_id must be non-negative");
    }
    if (std::find(object.structural_links.begin(), object.structural_links.end(), object.id) !=
        object.structural_links.end()) {
        throw ValidationError("object '" + object.id + "' links to itself");
    }
}

Corpus::Corpus(std::vector<DataObject> objects) {
    objects_.reserve(objects.size());
    for (auto& object : objects) {
        add(std::move(object));
    }
}

void Corpus::add(DataObject object) {
    check_object(object);
    if (by_id_.contains(object.id)) {
        throw ValidationError("duplicate object id '" + object.id + "'");
    }
    by_id_.emplace(object.id, objects_.size());
    objects_.push_back(std::move(object));
}

const DataObject& Corpus::lookup(std::string_view id) const {
    const auto* object = find(id);
    if (object == nullptr) {
        throw ValidationError("unknown object id '" + std::string(id) + "'");
    }
    return *object;
}

const DataObject* Corpus::find(std::string_view id) const {
    auto ordinal = ordinal_of(id);
    return ordinal ? &objects_[*ordinal] : nullptr;
}

std::optional<std::size_t> Corpus::ordinal_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

nlohmann::json to_json(const DataObject& object) {
    nlohmann::json j = object.extra.is_object() ? object.extra : nlohmann::json::object();
    j["id"] = object.id;
    j["content"] = object.content;
    j["structural_links"] = object.structural_links;
    j["entities"] = object.entities;
    if (object.doc_id) {
        j["doc_id"] = *object.doc_id;
        j["chunk_id"] = *object.chunk_id;
    }
    return j;
}

DataObject object_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ValidationError("data object must be a JSON object");
    }
    DataObject object;
    auto id = j.find("id");
    if (id == j.end() || !id->is_string()) {
        throw ValidationError("data object requires a string 'id'");
    }
    object.id = id->get<std::string>();
    auto content = j.find("content");
    if (content == j.end() || !content->is_string()) {
        throw ValidationError("object '" + object.id + "' requires a string 'content'");
    }
    object.content = content->get<std::string>();
    if (auto links = j.find("structural_links"); links != j.end() && !links->is_null()) {
        object.structural_links = string_array(*links, "structural_links");
    }
    if (auto entities = j.find("entities"); entities != j.end() && !entities->is_null()) {
        object.entities = string_array(*entities, "entities");
    }
    if (auto doc = j.find("doc_id"); doc != j.end() && !doc->is_null()) {
        if (!doc->is_string()) {
            throw ValidationError("object '" + object.id + "': doc_id must be a string");
        }
        object.doc_id = doc->get<std::string>();
    }
    if (auto chunk = j.find("chunk_id"); chunk != j.end() && !chunk->is_null()) {
        if (!chunk->is_number_integer()) {
            throw ValidationError("object '" + object.id + "': chunk_id must be an integer");
        }
        object.chunk_id = chunk->get<std::int64_t>();
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!is_known_field(it.key())) {
            object.extra[it.key()] = it.value();
        }
    }
    check_object(object);
    return object;
}

Corpus parse_corpus(std::istream& in, const std::string& source) {
    Corpus corpus;
    io::for_each_line(in, [&](std::size_t number, std::string_view line) {
        auto j = io::parse_json_line(line, source, number);
        try {
            corpus.add(object_from_json(j));
        } catch (const ValidationError& e) {
            throw ValidationError(source + ":" + std::to_string(number) + ": " + e.what());
        }
    });
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    return parse_corpus(in, path.string());
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& object : corpus) {
        out << to_json(object).dump() << '\n';
    }
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
    io::write_atomic(path, [&](std::ostream& out) { write_corpus(out, corpus); });
}

std::vector<Query> parse_queries(std::istream& in, const std::string& source) {
    std::vector<Query> queries;
    std::set<std::string> seen;
    io::for_each_line(in, [&](std::size_t number, std::string_view line) {
        auto j = io::parse_json_line(line, source, number);
        auto where = source + ":" + std::to_string(number) + ": ";
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("text") ||
            !j["text"].is_string()) {
            throw ValidationError(where + "query requires string 'id' and 'text'");
        }
        Query q{j["id"].get<std::string>(), j["text"].get<std::string>()};
        if (q.id.empty()) {
            throw ValidationError(where + "query id must be non-empty");
        }
        if (!seen.insert(q.id).second) {
            throw ValidationError(where + "duplicate query id '" + q.id + "'");
        }
        queries.push_back(std::move(q));
    });
    return queries;
}

std::vector<Query> load_queries(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    return parse_queries(in, path.string());
}

void save_queries(const std::filesystem::path& path, const std::vector<Query>& queries) {
    io::write_atomic(path, [&](std::ostream& out) {
        for (const auto& q : queries) {
            out << nlohmann::json{{"id", q.id}, {"text", q.text}}.dump() << '\n';
        }
    });
}

Qrels parse_qrels(std::istream& in, const std::string& source) {
    Qrels qrels;
    io::for_each_line(in, [&](std::size_t number, std::string_view line) {
        auto tab = line.find('\t');
        if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
            throw ParseError(source, number, "expected query_id<TAB>object_id");
        }
        auto query = line.substr(0, tab);
        auto object = line.substr(tab + 1);
        if (query.empty() || object.empty()) {
            throw ParseError(source, number, "empty query_id or object_id");
        }
        qrels[std::string(query)].insert(std::string(object));
    });
    return qrels;
}

Qrels load_qrels(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    return parse_qrels(in, path.string());
}

void save_qrels(const std::filesystem::path& path, const Qrels& qrels) {
    io::write_atomic(path, [&](std::ostream& out) {
        for (const auto& [query, objects] : qrels) {
            for (const auto& object : objects) {
                out << query << '\t' << object << '\n';
            }
        }
    });
}

std::string_view to_string(Finding::Kind kind) {
    switch (kind) {
        case Finding::Kind::dangling_link: return "dangling_link";
        case Finding::Kind::unknown_qrels_query: return "unknown_qrels_query";
        case Finding::Kind::unknown_qrels_object: return "unknown_qrels_object";
        case Finding::Kind::chunk_gap: return "chunk_gap";
        case Finding::Kind::empty_relevance: return "empty_relevance";
    }
    return "unknown";
}

std::vector<Finding> validate(const Corpus& corpus, const std::vector<Query>& queries,
                              const Qrels& qrels) {
    std::vector<Finding> findings;
    std::map<std::string, std::set<std::int64_t>> chunks;
    for (const auto& object : corpus) {
        for (const auto& target : object.structural_links) {
            if (corpus.find(target) == nullptr) {
                findings.push_back({Finding::Kind::dangling_link, target,
                                    "object '" + object.id + "' links to unknown '" + target +
                                        "'"});
            }
        }
        if (object.doc_id) {
            chunks[*object.doc_id].insert(*object.chunk_id);
        }
    }
    for (const auto& [doc, ids] : chunks) {
        std::int64_t expected = 0;
        for (auto id : ids) {
            for (; expected < id; ++expected) {
                findings.push_back({Finding::Kind::chunk_gap, doc,
                                    "document '" + doc + "' lacks chunk " +
                                        std::to_string(expected)});
            }
            expected = id + 1;
        }
    }
    std::set<std::string> query_ids;
    for (const auto& q : queries) {
        query_ids.insert(q.id);
    }
    for (const auto& [query, objects] : qrels) {
        if (!query_ids.contains(query)) {
            findings.push_back({Finding::Kind::unknown_qrels_query, query,
                                "qrels query '" + query + "' is not in the query set"});
        }
        for (const auto& object : objects) {
            if (corpus.find(object) == nullptr) {
                findings.push_back({Finding::Kind::unknown_qrels_object, object,
                                    "qrels for '" + query + "' reference unknown object '" +
                                        object + "'"});
            }
        }
    }
    return findings;
}

}  // namespace grapher
