#include "grapher/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "grapher/errors.hpp"
#include "grapher/io.hpp"

namespace grapher {

RunQuery run_query_from_base(const ScoredCandidateList& list) {
    RunQuery query;
    query.query_id = list.query_id;
    query.algo = "base";
    query.base_candidates = list.candidates;
    for (const auto& c : list.candidates) {
        query.result.entries.push_back({c.id, c.score, c.score});
    }
    return query;
}

nlohmann::json rerank_line_json(const RunQuery& query) {
    nlohmann::json candidates = nlohmann::json::array();
    for (const auto& e : query.result.entries) {
        candidates.push_back({{"id", e.id}, {"final", e.final_score}, {"seed", e.seed_score}});
    }
    nlohmann::json j{{"query_id", query.query_id},
                     {"algo", query.algo},
                     {"candidates", std::move(candidates)},
                     {"iterations", query.result.iterations},
                     {"converged", query.result.converged}};
    j["latency_s"] = query.latency_seconds ? nlohmann::json(*query.latency_seconds)
                                           : nlohmann::json(nullptr);
    return j;
}

void save_base_run(const std::filesystem::path& path,
                   const std::vector<ScoredCandidateList>& lists) {
    io::write_atomic(path, [&](std::ostream& out) {
        for (const auto& list : lists) out << to_json(list).dump() << '\n';
    });
}

void save_rerank_run(const std::filesystem::path& path, const Run& run) {
    io::write_atomic(path, [&](std::ostream& out) {
        for (const auto& query : run) out << rerank_line_json(query).dump() << '\n';
    });
}

Run load_run(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    const auto source = path.string();
    Run run;
    io::for_each_line(in, [&](std::size_t number, std::string_view line) {
        auto j = io::parse_json_line(line, source, number);
        try {
            const auto& candidates = j.at("candidates");
            const bool base = candidates.empty() ? !j.contains("algo")
                                                 : candidates.front().contains("score");
            if (base) {
                run.push_back(run_query_from_base(scored_list_from_json(j)));
                return;
            }
            RunQuery query;
            query.query_id = j.at("query_id").get<std::string>();
            query.algo = j.value("algo", std::string("unknown"));
            query.result.iterations = j.value("iterations", 0);
            query.result.converged = j.value("converged", true);
            if (auto l = j.find("latency_s"); l != j.end() && l->is_number()) {
                query.latency_seconds = l->get<double>();
            }
            for (const auto& c : candidates) {
                query.result.entries.push_back({c.at("id").get<std::string>(),
                                                c.at("final").get<double>(),
                                                c.at("seed").get<double>()});
            }
            run.push_back(std::move(query));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(source, number, std::string("malformed run line: ") + e.what());
        }
    });
    return run;
}

std::vector<RankedQuery> ranked_queries(const Run& run) {
    std::vector<RankedQuery> out;
    out.reserve(run.size());
    for (const auto& query : run) {
        RankedQuery ranked{query.query_id, {}, query.latency_seconds};
        for (const auto& e : query.result.entries) ranked.ranked_ids.push_back(e.id);
        out.push_back(std::move(ranked));
    }
    return out;
}

// ---------------------------------------------------------------------------

Run rerank_run(const Run& base, const Corpus& corpus, const RerankOptions& options) {
    options.config.check();
    Run out(base.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::string> errors(base.size());

    auto worker = [&] {
        for (std::size_t q = next++; q < base.size(); q = next++) {
            try {
                const auto& query = base[q];
                std::vector<std::string> ids;
                ScoreVector seed;
                ids.reserve(query.result.entries.size());
                for (const auto& e : query.result.entries) {
                    ids.push_back(e.id);
                    seed.values.push_back(e.seed_score);
                }
                const auto start = std::chrono::steady_clock::now();
                const auto graph = build_graph(ids, corpus, options.scheme);
                auto result = rerank(graph, seed, options.config);
                const auto stop = std::chrono::steady_clock::now();

                if (options.dump_graph_dir) {
                    auto path = *options.dump_graph_dir / (query.query_id + ".graph.json");
                    io::write_atomic(path, [&](std::ostream& os) {
                        os << dump_graph(graph).dump() << '\n';
                    });
                }
                out[q].query_id = query.query_id;
                out[q].algo = std::string(to_string(options.config.algorithm));
                out[q].result = std::move(result);
                out[q].latency_seconds = std::chrono::duration<double>(stop - start).count();
            } catch (const std::exception& e) {
                errors[q] = e.what();
            }
        }
    };
    const unsigned threads = std::max(1u, options.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (std::size_t q = 0; q < errors.size(); ++q) {
        if (!errors[q].empty()) {
            throw Error("rerank of query '" + base[q].query_id + "' failed: " + errors[q]);
        }
    }
    return out;
}

std::vector<double> parse_alpha_sweep(std::string_view spec) {
    std::vector<double> parts;
    std::string text(spec);
    std::istringstream in(text);
    std::string piece;
    while (std::getline(in, piece, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(piece, &used));
            if (used != piece.size()) throw std::invalid_argument(piece);
        } catch (const std::exception&) {
            throw ConfigError("malformed alpha sweep '" + text + "' (expected lo:hi:step)");
        }
    }
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
        throw ConfigError("malformed alpha sweep '" + text + "' (expected lo:hi:step)");
    }
    std::vector<double> alphas;
    const auto steps = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 0.5));
    for (long i = 0; i <= steps; ++i) {
        // Rounded to 1e-12 so 0.1 + 2*0.1 prints as 0.3.
        double a = parts[0] + static_cast<double>(i) * parts[2];
        alphas.push_back(std::round(a * 1e12) / 1e12);
    }
    return alphas;
}

// ---------------------------------------------------------------------------

FeatureMode parse_feature_mode(std::string_view name) {
    if (name == "train") return FeatureMode::train;
    if (name == "infer") return FeatureMode::infer;
    throw ConfigError("unknown feature mode '" + std::string(name) + "' (expected train|infer)");
}

std::vector<nlohmann::json> export_features(const FeatureExportInputs& inputs) {
    if (!inputs.gcs_run || !inputs.corpus || !inputs.queries || !inputs.embeddings) {
        throw ConfigError("feature export needs a run, corpus, queries and embeddings");
    }
    if (inputs.mode == FeatureMode::train && !inputs.qrels) {
        throw ConfigError("train-mode feature export requires qrels");
    }
    std::unordered_map<std::string, const Query*> query_by_id;
    for (const auto& q : *inputs.queries) query_by_id.emplace(q.id, &q);

    std::vector<nlohmann::json> records;
    records.reserve(inputs.gcs_run->size());
    for (const auto& run_query : *inputs.gcs_run) {
        if (run_query.algo != "gcs") {
            throw MissingInputError("query '" + run_query.query_id +
                                    "' has no GCS scores (algo '" + run_query.algo +
                                    "'); run `grapher rerank --algo gcs` first");
        }
        auto q = query_by_id.find(run_query.query_id);
        if (q == query_by_id.end()) {
            throw MissingInputError("query '" + run_query.query_id + "' not in the query set");
        }
        const auto query_vector = inputs.embeddings->embed_one(q->second->id, q->second->text);
        const std::size_t d = query_vector.size();

        std::vector<std::string> ids;
        for (const auto& e : run_query.result.entries) ids.push_back(e.id);
        const auto graph = build_graph(ids, *inputs.corpus, inputs.scheme);
        const bool symmetric = graph.adjacency.is_symmetric();

        const std::set<std::string>* relevant = nullptr;
        if (inputs.mode == FeatureMode::train) {
            auto it = inputs.qrels->find(run_query.query_id);
            if (it != inputs.qrels->end()) relevant = &it->second;
        }

        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& e : run_query.result.entries) {
            const auto& object = inputs.corpus->lookup(e.id);
            const auto object_vector = inputs.embeddings->embed_one(object.id, object.content);
            if (object_vector.size() != d) {
                throw DimensionError("object '" + e.id + "' embedding dimension " +
                                     std::to_string(object_vector.size()) +
                                     " != query dimension " + std::to_string(d));
            }
            std::vector<double> features;
            features.reserve(1 + 2 * d);
            features.push_back(e.final_score);
            features.insert(features.end(), query_vector.begin(), query_vector.end());
            features.insert(features.end(), object_vector.begin(), object_vector.end());
            nlohmann::json node{{"id", e.id},
                                {"gcs", e.final_score},
                                {"seed", e.seed_score},
                                {"features", std::move(features)}};
            if (inputs.mode == FeatureMode::train) {
                node["label"] = relevant && relevant->contains(e.id) ? 1 : 0;
            }
            nodes.push_back(std::move(node));
        }

        nlohmann::json edges = nlohmann::json::array();
        for (std::size_t i = 0; i < graph.size(); ++i) {
            for (std::size_t j = symmetric ? i + 1 : 0; j < graph.size(); ++j) {
                if (double w = graph.adjacency(i, j); w > 0.0) edges.push_back({i, j, w});
            }
        }
        records.push_back({{"query_id", run_query.query_id},
                           {"mode", inputs.mode == FeatureMode::train ? "train" : "infer"},
                           {"scheme", to_string(inputs.scheme)},
                           {"embedding_dim", d},
                           {"feature_dim", 1 + 2 * d},
                           {"query_embedding", query_vector},
                           {"nodes", std::move(nodes)},
                           {"undirected", symmetric},
                           {"edges", std::move(edges)}});
    }
    return records;
}

Run import_scores(const std::vector<nlohmann::json>& score_lines, const Run& run) {
    std::unordered_map<std::string, std::unordered_map<std::string, double>> scores;
    for (const auto& line : score_lines) {
        try {
            auto& table = scores[line.at("query_id").get<std::string>()];
            for (const auto& [id, value] : line.at("scores").items()) {
                table[id] = value.get<double>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("<scores>", 0,
                             std::string("score lines need query_id and scores: ") + e.what());
        }
    }
    Run out;
    out.reserve(run.size());
    for (const auto& query : run) {
        auto table = scores.find(query.query_id);
        if (table == scores.end()) {
            throw MissingInputError("no imported scores for query '" + query.query_id + "'");
        }
        RunQuery imported;
        imported.query_id = query.query_id;
        imported.algo = "imported";
        for (const auto& e : query.result.entries) {
            auto s = table->second.find(e.id);
            if (s == table->second.end()) {
                throw MissingInputError("query '" + query.query_id + "': candidate '" + e.id +
                                        "' has no imported score");
            }
            if (!std::isfinite(s->second)) {
                throw NumericError("query '" + query.query_id + "': candidate '" + e.id +
                                   "' has a non-finite score");
            }
            imported.result.entries.push_back({e.id, s->second, e.seed_score});
        }
        sort_ranked(imported.result.entries);
        out.push_back(std::move(imported));
    }
    return out;
}

std::vector<nlohmann::json> load_jsonl(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    std::vector<nlohmann::json> lines;
    const auto source = path.string();
    io::for_each_line(in, [&](std::size_t number, std::string_view line) {
        lines.push_back(io::parse_json_line(line, source, number));
    });
    return lines;
}

void save_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines) {
    io::write_atomic(path, [&](std::ostream& out) {
        for (const auto& line : lines) out << line.dump() << '\n';
    });
}

// ---------------------------------------------------------------------------

void record_manifest(const std::filesystem::path& dir, const std::string& stage,
                     const std::vector<std::filesystem::path>& inputs,
                     const nlohmann::json& config,
                     const std::vector<std::filesystem::path>& outputs) {
    std::filesystem::create_directories(dir);
    const auto path = dir / "manifest.jsonl";

    nlohmann::json digests = nlohmann::json::object();
    for (const auto& input : inputs) digests[input.string()] = io::sha256_file(input);
    nlohmann::json produced = nlohmann::json::object();
    for (const auto& output : outputs) produced[output.string()] = io::sha256_file(output);
    nlohmann::json entry{{"stage", stage},
                         {"inputs", std::move(digests)},
                         {"config", config},
                         {"config_digest", io::sha256_hex(config.dump())},
                         {"outputs", std::move(produced)}};

    std::map<std::string, nlohmann::json> lines;
    if (std::filesystem::exists(path)) {
        for (auto& line : load_jsonl(path)) {
            auto name = line.value("stage", std::string());
            lines[name] = std::move(line);
        }
    }
    lines[stage] = std::move(entry);
    io::write_atomic(path, [&](std::ostream& out) {
        for (const auto& [name, line] : lines) out << line.dump() << '\n';
    });
}

}  // namespace grapher
