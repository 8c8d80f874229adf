#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace grapher {

/// One indexable unit (passage, serialized table or chunk) plus its enrichment fields.
///
/// `structural_links` and `entities` behave as ordered sets: insertion order is kept,
/// duplicates are rejected by the mutators below. Fields the loader does not know are kept
/// in `extra` and written back on save.
struct DataObject {
    std::string id;
    std::string content;
    std::vector<std::string> structural_links;
    std::vector<std::string> entities;
    std::optional<std::string> doc_id;
    std::optional<std::int64_t> chunk_id;
    nlohmann::json extra = nlohmann::json::object();

    bool add_link(const std::string& target);
    bool add_entity(const std::string& entity);

    bool operator==(const DataObject&) const = default;
};

/// Throws ValidationError when `object` breaks a per-object invariant.
void check_object(const DataObject& object);

/// Insertion-ordered collection of DataObject with id lookup.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<DataObject> objects);

    /// Throws ValidationError on a duplicate id or a broken object invariant.
    void add(DataObject object);

    std::size_t size() const noexcept { return objects_.size(); }
    bool empty() const noexcept { return objects_.empty(); }

    const DataObject& at(std::size_t ordinal) const { return objects_.at(ordinal); }
    const DataObject& lookup(std::string_view id) const;
    const DataObject* find(std::string_view id) const;
    std::optional<std::size_t> ordinal_of(std::string_view id) const;

    /// Mutable access for enrichment passes; callers must keep invariants.
    DataObject& mutable_at(std::size_t ordinal) { return objects_.at(ordinal); }

    auto begin() const noexcept { return objects_.begin(); }
    auto end() const noexcept { return objects_.end(); }
    const std::vector<DataObject>& objects() const noexcept { return objects_; }

    bool operator==(const Corpus& other) const { return objects_ == other.objects_; }

private:
    std::vector<DataObject> objects_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

struct Query {
    std::string id;
    std::string text;

    bool operator==(const Query&) const = default;
};

/// query id -> relevant object ids (binary relevance).
using Qrels = std::map<std::string, std::set<std::string>>;

nlohmann::json to_json(const DataObject& object);
DataObject object_from_json(const nlohmann::json& j);

Corpus parse_corpus(std::istream& in, const std::string& source = "<stream>");
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

std::vector<Query> parse_queries(std::istream& in, const std::string& source = "<stream>");
std::vector<Query> load_queries(const std::filesystem::path& path);
void save_queries(const std::filesystem::path& path, const std::vector<Query>& queries);

Qrels parse_qrels(std::istream& in, const std::string& source = "<stream>");
Qrels load_qrels(const std::filesystem::path& path);
void save_qrels(const std::filesystem::path& path, const Qrels& qrels);

struct Finding {
    enum class Kind {
        dangling_link,
        unknown_qrels_query,
        unknown_qrels_object,
        chunk_gap,
        empty_relevance,
    };
    Kind kind;
    std::string subject;
    std::string message;
};

std::string_view to_string(Finding::Kind kind);

/// Cross-file consistency checks. An empty result means the triple is consistent.
std::vector<Finding> validate(const Corpus& corpus, const std::vector<Query>& queries,
                              const Qrels& qrels);

}  // namespace grapher
