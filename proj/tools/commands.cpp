#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "grapher/corpus.hpp"
#include "grapher/enrichment.hpp"
#include "grapher/errors.hpp"
#include "grapher/evaluation.hpp"
#include "grapher/graph.hpp"
#include "grapher/io.hpp"
#include "grapher/pipeline.hpp"
#include "grapher/rerank.hpp"
#include "grapher/retriever.hpp"
#include "grapher/synthetic.hpp"

namespace grapher::cli {

namespace fs = std::filesystem;

namespace {

struct StrictFindings : Error {
    using Error::Error;
};

void require_files(std::initializer_list<const std::string*> paths) {
    for (const auto* path : paths) {
        if (path && !path->empty() && !fs::exists(*path)) {
            throw MissingInputError("input not found: " + *path);
        }
    }
}

fs::path output_dir_of(const fs::path& out) {
    auto parent = out.parent_path();
    return parent.empty() ? fs::path(".") : parent;
}

std::vector<fs::path> existing(std::initializer_list<std::string> paths) {
    std::vector<fs::path> out;
    for (const auto& p : paths) {
        if (!p.empty()) out.emplace_back(p);
    }
    return out;
}

struct EmbedderFlags {
    std::string vectors;
    std::string embedder;

    void add(CLI::App& app) {
        app.add_option("--vectors", vectors, "vectors JSONL or binary manifest (.json)");
        app.add_option("--embedder", embedder, "hash:<dim> or remote (GRAPHER_EMBED_ENDPOINT)");
    }

    std::unique_ptr<EmbeddingProvider> make() const {
        if (!vectors.empty()) {
            return std::make_unique<FileEmbeddings>(FileEmbeddings::load(vectors));
        }
        if (embedder.rfind("hash:", 0) == 0) {
            return std::make_unique<HashEmbeddings>(std::stoul(embedder.substr(5)));
        }
        if (embedder == "remote") {
            return std::make_unique<RemoteEmbeddings>(RemoteEmbeddings::from_env());
        }
        throw ConfigError("choose an embedding source: --vectors <file> or --embedder hash:<dim>|remote");
    }

    nlohmann::json describe() const {
        return {{"vectors", vectors}, {"embedder", embedder}};
    }
};

struct RerankFlags {
    std::string scheme = "structural";
    std::string algo = "gcs";
    double alpha = 0.5;
    double epsilon = 1e-10;
    int max_iters = 1000;
    std::string dangling = "uniform";
    bool ppr_floor = false;
    bool ppr_raw_seed = false;

    void add(CLI::App& app) {
        app.add_option("--scheme", scheme, "structural|conceptual|contextual|union");
        app.add_option("--algo", algo, "gcs|ppr");
        app.add_option("--alpha", alpha, "damping factor in (0,1)");
        app.add_option("--epsilon", epsilon, "L1 convergence tolerance");
        app.add_option("--max-iters", max_iters, "iteration cap");
        app.add_option("--ppr-dangling", dangling, "PPR dangling mass target: uniform|seed");
        app.add_flag("--ppr-floor", ppr_floor, "PPR: floor final scores at the normalized seed");
        app.add_flag("--ppr-raw-seed", ppr_raw_seed, "PPR: do not L1-normalize seeds");
    }

    RerankConfig config() const {
        RerankConfig c;
        c.alpha = alpha;
        c.epsilon = epsilon;
        c.max_iters = max_iters;
        c.algorithm = parse_algorithm(algo);
        c.ppr_dangling = parse_dangling(dangling);
        c.ppr_apply_floor = ppr_floor;
        c.ppr_normalize_seed = !ppr_raw_seed;
        c.check();
        return c;
    }

    nlohmann::json describe(double a) const {
        return {{"scheme", scheme},         {"algo", algo},         {"alpha", a},
                {"epsilon", epsilon},       {"max_iters", max_iters}, {"ppr_dangling", dangling},
                {"ppr_floor", ppr_floor},   {"ppr_raw_seed", ppr_raw_seed}};
    }
};

EvalConfig eval_config(const std::vector<std::size_t>& ks) {
    EvalConfig config;
    if (!ks.empty()) config.ks = ks;
    config.check();
    return config;
}

std::string alpha_label(double alpha) {
    std::ostringstream s;
    s << alpha;
    return s.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"graph-based enrichment and reranking for retrieval", "grapher"};
    app.require_subcommand(1);
    std::function<void()> action;

    // validate ------------------------------------------------------------
    std::string corpus_path, queries_path, qrels_path;
    bool strict = false;
    auto* validate_cmd = app.add_subcommand("validate", "check corpus / queries / qrels consistency");
    validate_cmd->add_option("--corpus", corpus_path)->required();
    validate_cmd->add_option("--queries", queries_path)->required();
    validate_cmd->add_option("--qrels", qrels_path)->required();
    validate_cmd->add_flag("--strict", strict, "exit 3 when findings exist");
    validate_cmd->callback([&] {
        action = [&] {
            require_files({&corpus_path, &queries_path, &qrels_path});
            auto findings = validate(load_corpus(corpus_path), load_queries(queries_path),
                                     load_qrels(qrels_path));
            for (const auto& f : findings) {
                out << to_string(f.kind) << '\t' << f.subject << '\t' << f.message << '\n';
            }
            out << findings.size() << " finding(s)\n";
            if (strict && !findings.empty()) throw StrictFindings("validation findings present");
        };
    });

    // enrich --------------------------------------------------------------
    std::string documents_path, links_path, entities_path, out_path;
    std::size_t window = 128;
    bool prechunked = false, use_llm = false, normalize_entities = false;
    std::string llm_model = "gpt-4o";
    int llm_retries = 3;
    unsigned threads = 1;
    auto* enrich_cmd = app.add_subcommand("enrich", "attach links, entities and chunk ids");
    enrich_cmd->add_option("--corpus", corpus_path, "existing corpus JSONL");
    enrich_cmd->add_option("--documents", documents_path, "documents JSONL {doc_id,text[,chunk_id]}");
    enrich_cmd->add_option("--window", window, "tokens per chunk in split mode");
    enrich_cmd->add_flag("--prechunked", prechunked, "documents already carry chunk_id");
    enrich_cmd->add_option("--links", links_path, "link table TSV source<TAB>target");
    enrich_cmd->add_option("--entities", entities_path, "entity fixture JSONL {id,entities}");
    enrich_cmd->add_flag("--llm", use_llm, "extract entities with the remote LLM");
    enrich_cmd->add_option("--llm-model", llm_model);
    enrich_cmd->add_option("--llm-retries", llm_retries);
    enrich_cmd->add_flag("--normalize-entities", normalize_entities);
    enrich_cmd->add_option("--threads", threads);
    enrich_cmd->add_option("--out", out_path)->required();
    enrich_cmd->callback([&] {
        action = [&] {
            require_files({&corpus_path, &documents_path, &links_path, &entities_path});
            if (corpus_path.empty() == documents_path.empty()) {
                throw ConfigError("give exactly one of --corpus or --documents");
            }
            Corpus corpus;
            if (!corpus_path.empty()) {
                corpus = load_corpus(corpus_path);
            } else {
                ChunkingConfig chunking{prechunked ? ChunkingConfig::Mode::prechunked
                                                   : ChunkingConfig::Mode::split,
                                        window};
                corpus = Corpus(enrich_contextual(load_documents(documents_path), chunking));
            }
            if (!links_path.empty()) corpus = enrich_structural(std::move(corpus), load_links(links_path));

            std::unique_ptr<EntityExtractor> extractor;
            FixtureExtractor* fixture = nullptr;
            if (!entities_path.empty()) {
                auto f = std::make_unique<FixtureExtractor>(
                    FixtureExtractor::load(entities_path));
                fixture = f.get();
                extractor = std::move(f);
            } else if (use_llm) {
                auto config = RemoteLlmConfig::from_env();
                config.model = llm_model;
                config.retries = llm_retries;
                extractor = std::make_unique<RemoteLlmExtractor>(config);
            }
            if (extractor) {
                auto report = enrich_conceptual(std::move(corpus), *extractor,
                                                {normalize_entities, threads});
                corpus = std::move(report.corpus);
                out << "entities: extracted " << report.extracted << ", skipped "
                    << report.skipped << ", failed " << report.failures.size() << '\n';
                for (const auto& [id, reason] : report.failures) {
                    err << "enrichment failed for '" << id << "': " << reason << '\n';
                }
                if (fixture && !fixture->misses().empty()) {
                    out << "fixture misses: " << fixture->misses().size() << '\n';
                }
            }
            save_corpus(out_path, corpus);
            record_manifest(output_dir_of(out_path), "enrich:" + fs::path(out_path).filename().string(),
                            existing({corpus_path, documents_path, links_path, entities_path}),
                            {{"window", window}, {"prechunked", prechunked}, {"llm", use_llm},
                             {"llm_model", llm_model}, {"normalize_entities", normalize_entities}},
                            {out_path});
            out << "wrote " << corpus.size() << " objects to " << out_path << '\n';
        };
    });

    // index ---------------------------------------------------------------
    EmbedderFlags embed_flags;
    std::string out_dir;
    double k1 = 1.2, b = 0.75;
    auto* index_cmd = app.add_subcommand("index", "build the BM25 index and embed every object");
    index_cmd->add_option("--corpus", corpus_path)->required();
    index_cmd->add_option("--queries", queries_path, "also embed queries");
    embed_flags.add(*index_cmd);
    index_cmd->add_option("--k1", k1);
    index_cmd->add_option("--b", b);
    index_cmd->add_option("--out-dir", out_dir)->required();
    index_cmd->callback([&] {
        action = [&] {
            require_files({&corpus_path, &queries_path, &embed_flags.vectors});
            const auto corpus = load_corpus(corpus_path);
            auto provider = embed_flags.make();
            RetrieverConfig config;
            config.bm25 = {k1, b};
            auto built = build_index(corpus, *provider, config);
            std::vector<std::pair<std::string, std::vector<float>>> rows;
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                auto v = built.store.at(i);
                rows.emplace_back(corpus.at(i).id, std::vector<float>(v.begin(), v.end()));
            }
            if (!queries_path.empty()) {
                for (const auto& q : load_queries(queries_path)) {
                    rows.emplace_back(q.id, provider->embed_one(q.id, q.text));
                }
            }
            const fs::path dir(out_dir);
            save_vectors_jsonl(dir / "vectors.jsonl", rows);
            nlohmann::json stats{{"objects", built.index.size()},
                                 {"vocabulary", built.index.vocabulary_size()},
                                 {"average_length", built.index.average_length()},
                                 {"dim", built.store.dimension()},
                                 {"k1", k1},
                                 {"b", b}};
            io::write_atomic(dir / "index_stats.json",
                             [&](std::ostream& os) { os << stats.dump(2) << '\n'; });
            record_manifest(dir, "index", existing({corpus_path, queries_path, embed_flags.vectors}),
                            {{"embedding", embed_flags.describe()}, {"k1", k1}, {"b", b}},
                            {dir / "vectors.jsonl", dir / "index_stats.json"});
            out << stats.dump() << '\n';
        };
    });

    // search --------------------------------------------------------------
    std::size_t topn = 200;
    double w_bm25 = 0.3;
    std::string norm_scope = "corpus";
    auto* search_cmd = app.add_subcommand("search", "hybrid BM25 + dense retrieval");
    search_cmd->add_option("--corpus", corpus_path)->required();
    search_cmd->add_option("--queries", queries_path)->required();
    embed_flags.add(*search_cmd);
    search_cmd->add_option("--topn", topn);
    search_cmd->add_option("--w-bm25", w_bm25, "BM25 weight; dense weight is 1 - w");
    search_cmd->add_option("--norm-scope", norm_scope, "corpus|pool");
    search_cmd->add_option("--k1", k1);
    search_cmd->add_option("--b", b);
    search_cmd->add_option("--threads", threads);
    search_cmd->add_option("--out", out_path)->required();
    search_cmd->callback([&] {
        action = [&] {
            require_files({&corpus_path, &queries_path, &embed_flags.vectors});
            RetrieverConfig config;
            config.n = topn;
            config.w_bm25 = w_bm25;
            config.w_dense = 1.0 - w_bm25;
            config.bm25 = {k1, b};
            if (norm_scope == "pool") {
                config.norm_scope = RetrieverConfig::NormScope::pool;
            } else if (norm_scope != "corpus") {
                throw ConfigError("--norm-scope must be corpus or pool");
            }
            config.check();
            const auto corpus = load_corpus(corpus_path);
            const auto queries = load_queries(queries_path);
            auto provider = embed_flags.make();
            auto built = build_index(corpus, *provider, config);
            std::vector<std::vector<float>> query_vectors;
            for (const auto& q : queries) query_vectors.push_back(provider->embed_one(q.id, q.text));
            std::vector<ScoredCandidateList> lists(queries.size());
            std::atomic<std::size_t> next{0};
            std::vector<std::string> errors(queries.size());
            auto worker = [&] {
                for (std::size_t i = next++; i < queries.size(); i = next++) {
                    try {
                        lists[i] = hybrid_retrieve(queries[i], corpus, built.index, built.store,
                                                   query_vectors[i], config);
                    } catch (const std::exception& e) {
                        errors[i] = e.what();
                    }
                }
            };
            {
                std::vector<std::jthread> pool;
                for (unsigned t = 0; t < std::max(1u, threads); ++t) pool.emplace_back(worker);
            }
            for (std::size_t i = 0; i < errors.size(); ++i) {
                if (!errors[i].empty()) throw Error("query '" + queries[i].id + "': " + errors[i]);
            }
            save_base_run(out_path, lists);
            record_manifest(output_dir_of(out_path), "search:" + fs::path(out_path).filename().string(),
                            existing({corpus_path, queries_path, embed_flags.vectors}),
                            {{"embedding", embed_flags.describe()}, {"topn", topn},
                             {"w_bm25", w_bm25}, {"norm_scope", norm_scope}, {"k1", k1}, {"b", b}},
                            {out_path});
            out << "searched " << queries.size() << " queries -> " << out_path << '\n';
        };
    });

    // rerank --------------------------------------------------------------
    RerankFlags rerank_flags;
    std::string run_path, dump_graph, sweep;
    std::vector<std::size_t> ks;
    auto* rerank_cmd = app.add_subcommand("rerank", "graph build + GCS/PPR reranking of a base run");
    rerank_cmd->add_option("--corpus", corpus_path)->required();
    rerank_cmd->add_option("--run", run_path, "base run from `search`")->required();
    rerank_flags.add(*rerank_cmd);
    rerank_cmd->add_option("--dump-graph", dump_graph, "directory for per-query graph JSON");
    rerank_cmd->add_option("--sweep-alpha", sweep, "lo:hi:step; one run (and report) per alpha");
    rerank_cmd->add_option("--qrels", qrels_path, "evaluate each sweep point");
    rerank_cmd->add_option("--k", ks)->delimiter(',');
    rerank_cmd->add_option("--threads", threads);
    rerank_cmd->add_option("--out", out_path)->required();
    rerank_cmd->callback([&] {
        action = [&] {
            require_files({&corpus_path, &run_path, &qrels_path});
            const auto corpus = load_corpus(corpus_path);
            const auto base = load_run(run_path);
            RerankOptions options;
            options.scheme = parse_scheme(rerank_flags.scheme);
            options.config = rerank_flags.config();
            options.threads = threads;
            if (!dump_graph.empty()) options.dump_graph_dir = fs::path(dump_graph);

            std::vector<double> alphas{rerank_flags.alpha};
            if (!sweep.empty()) alphas = parse_alpha_sweep(sweep);
            const fs::path out_file(out_path);
            std::optional<Qrels> qrels;
            if (!qrels_path.empty()) qrels = load_qrels(qrels_path);
            const auto config = eval_config(ks);

            for (double alpha : alphas) {
                options.config.alpha = alpha;
                auto run = rerank_run(base, corpus, options);
                fs::path target = out_file;
                if (!sweep.empty()) {
                    target = out_file.parent_path() /
                             (out_file.stem().string() + ".alpha" + alpha_label(alpha) +
                              out_file.extension().string());
                }
                save_rerank_run(target, run);
                std::vector<fs::path> outputs{target};
                if (qrels) {
                    auto rq = ranked_queries(run);
                    auto report = evaluate_run(rq, *qrels, config);
                    auto report_path = target;
                    report_path.replace_extension(".report.json");
                    io::write_atomic(report_path,
                                     [&](std::ostream& os) { os << to_json(report).dump(2) << '\n'; });
                    outputs.push_back(report_path);
                    out << "alpha " << alpha_label(alpha) << '\n' << to_text_table(report);
                }
                record_manifest(output_dir_of(target), "rerank:" + target.filename().string(),
                                existing({corpus_path, run_path, qrels_path}),
                                rerank_flags.describe(alpha), outputs);
                out << "reranked " << run.size() << " queries -> " << target.string() << '\n';
            }
        };
    });

    // eval ----------------------------------------------------------------
    std::string baseline_path, report_path;
    bool csv = false;
    auto* eval_cmd = app.add_subcommand("eval", "perfect recall@K of a run");
    eval_cmd->add_option("--run", run_path)->required();
    eval_cmd->add_option("--qrels", qrels_path)->required();
    eval_cmd->add_option("--k", ks)->delimiter(',');
    eval_cmd->add_option("--baseline", baseline_path, "base run to compare against");
    eval_cmd->add_flag("--csv", csv, "emit one CSV row per (K, filter)");
    eval_cmd->add_option("--out", report_path, "report JSON path");
    eval_cmd->callback([&] {
        action = [&] {
            require_files({&run_path, &qrels_path, &baseline_path});
            const auto qrels = load_qrels(qrels_path);
            const auto config = eval_config(ks);
            auto rq = ranked_queries(load_run(run_path));
            auto report = evaluate_run(rq, qrels, config);
            nlohmann::json j{{"run", to_json(report)}};
            if (csv) {
                out << to_csv(report);
            } else {
                out << to_text_table(report);
            }
            if (!baseline_path.empty()) {
                auto base_rq = ranked_queries(load_run(baseline_path));
                auto base_report = evaluate_run(base_rq, qrels, config);
                auto deltas = compare_runs(base_report, report);
                j["baseline"] = to_json(base_report);
                j["delta"] = to_json(deltas);
                if (!csv) out << "baseline\n" << to_text_table(base_report) << "delta (pp)\n"
                              << to_text_table(deltas);
            }
            for (const auto& f : report.findings) err << "finding: " << f << '\n';
            if (!report_path.empty()) {
                io::write_atomic(report_path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
                record_manifest(output_dir_of(report_path),
                                "eval:" + fs::path(report_path).filename().string(),
                                existing({run_path, qrels_path, baseline_path}),
                                {{"ks", config.ks}}, {report_path});
            }
        };
    });

    // export-features -----------------------------------------------------
    std::string mode = "infer";
    auto* export_cmd = app.add_subcommand("export-features", "node features for an external graph ranker");
    export_cmd->add_option("--run", run_path, "GCS rerank run")->required();
    export_cmd->add_option("--corpus", corpus_path)->required();
    export_cmd->add_option("--queries", queries_path)->required();
    embed_flags.add(*export_cmd);
    export_cmd->add_option("--scheme", rerank_flags.scheme);
    export_cmd->add_option("--mode", mode, "train|infer");
    export_cmd->add_option("--qrels", qrels_path, "labels (train mode)");
    export_cmd->add_option("--out", out_path)->required();
    export_cmd->callback([&] {
        action = [&] {
            require_files({&run_path, &corpus_path, &queries_path, &qrels_path, &embed_flags.vectors});
            const auto run = load_run(run_path);
            const auto corpus = load_corpus(corpus_path);
            const auto queries = load_queries(queries_path);
            auto provider = embed_flags.make();
            std::optional<Qrels> qrels;
            if (!qrels_path.empty()) qrels = load_qrels(qrels_path);
            FeatureExportInputs inputs;
            inputs.gcs_run = &run;
            inputs.corpus = &corpus;
            inputs.queries = &queries;
            inputs.embeddings = provider.get();
            inputs.scheme = parse_scheme(rerank_flags.scheme);
            inputs.mode = parse_feature_mode(mode);
            inputs.qrels = qrels ? &*qrels : nullptr;
            auto records = export_features(inputs);
            save_jsonl(out_path, records);
            record_manifest(output_dir_of(out_path), "export:" + fs::path(out_path).filename().string(),
                            existing({run_path, corpus_path, queries_path, qrels_path, embed_flags.vectors}),
                            {{"scheme", rerank_flags.scheme}, {"mode", mode}}, {out_path});
            out << "exported " << records.size() << " feature records -> " << out_path << '\n';
        };
    });

    // import-scores -------------------------------------------------------
    std::string scores_path;
    auto* import_cmd = app.add_subcommand("import-scores", "rank a run by externally computed scores");
    import_cmd->add_option("--scores", scores_path, "JSONL {query_id, scores:{id:score}}")->required();
    import_cmd->add_option("--run", run_path)->required();
    import_cmd->add_option("--out", out_path)->required();
    import_cmd->callback([&] {
        action = [&] {
            require_files({&scores_path, &run_path});
            auto imported = import_scores(load_jsonl(scores_path), load_run(run_path));
            save_rerank_run(out_path, imported);
            record_manifest(output_dir_of(out_path), "import:" + fs::path(out_path).filename().string(),
                            existing({scores_path, run_path}), nlohmann::json::object(), {out_path});
            out << "imported scores for " << imported.size() << " queries -> " << out_path << '\n';
        };
    });

    // gen-synthetic -------------------------------------------------------
    std::string pattern;
    std::uint64_t seed = 0;
    std::size_t n_queries = 0, dim = 128;
    double easy_fraction = 0.3;
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "write a seeded synthetic benchmark");
    gen_cmd->add_option("--pattern", pattern, "fk-triple|hub")->required();
    gen_cmd->add_option("--seed", seed)->required();
    gen_cmd->add_option("--queries", n_queries, "number of queries (default 100 fk-triple, 1 hub)");
    gen_cmd->add_option("--dim", dim);
    gen_cmd->add_option("--easy-fraction", easy_fraction);
    gen_cmd->add_option("--out-dir", out_dir)->required();
    gen_cmd->callback([&] {
        action = [&] {
            synthetic::Options options;
            options.pattern = synthetic::parse_pattern(pattern);
            options.seed = seed;
            options.queries = n_queries ? n_queries
                                        : (options.pattern == synthetic::Pattern::hub ? 1 : 100);
            options.dim = dim;
            options.easy_fraction = easy_fraction;
            auto dataset = synthetic::generate(options);
            synthetic::write(out_dir, dataset);
            const fs::path dir(out_dir);
            record_manifest(dir, "gen-synthetic", {},
                            {{"pattern", pattern}, {"seed", seed}, {"queries", options.queries},
                             {"dim", dim}, {"easy_fraction", easy_fraction}},
                            {dir / "corpus.jsonl", dir / "queries.jsonl", dir / "qrels.tsv",
                             dir / "vectors.jsonl"});
            out << "generated " << dataset.corpus.size() << " objects, " << dataset.queries.size()
                << " queries -> " << out_dir << '\n';
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        const int code = app.exit(e, o, er);
        out << o.str();
        err << er.str();
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (action) action();
        return kExitOk;
    } catch (const StrictFindings& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const MissingInputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitMissingInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace grapher::cli
