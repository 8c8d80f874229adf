#include <gtest/gtest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "grapher/enrichment.hpp"
#include "grapher/errors.hpp"
#include "support.hpp"

using namespace grapher;
using grapher::testing::object;

namespace {

using Table = std::map<std::string, std::vector<std::string>>;

class ListExtractor final : public EntityExtractor {
public:
    explicit ListExtractor(std::map<std::string, std::vector<std::string>> table)
        : table_(std::move(table)) {}
    std::vector<std::string> extract(const DataObject& o) override {
        ++calls;
        auto it = table_.find(o.id);
        if (it == table_.end()) throw TransportError("no entry for " + o.id);
        return it->second;
    }
    std::atomic<int> calls{0};

private:
    std::map<std::string, std::vector<std::string>> table_;
};

RemoteLlmConfig fast_config() {
    RemoteLlmConfig c;
    c.endpoint = "http://unused";
    c.initial_backoff = std::chrono::milliseconds(1);
    return c;
}

}  // namespace

// --- structural -----------------------------------------------------------

TEST(EnrichStructural, OrdersCustomersLinkIsMutual) {
    Corpus c({object("t_orders"), object("t_customers"), object("t_stores")});
    auto out = enrich_structural(c, {{"t_orders", "t_customers"}});
    EXPECT_EQ(out.lookup("t_orders").structural_links, std::vector<std::string>{"t_customers"});
    EXPECT_EQ(out.lookup("t_customers").structural_links, std::vector<std::string>{"t_orders"});
    EXPECT_TRUE(out.lookup("t_stores").structural_links.empty());
}

TEST(EnrichStructural, EmptyPairsAndSelfPairsLeaveCorpusUnchanged) {
    Corpus c({object("t1"), object("t2", "", {"t1"})});
    EXPECT_EQ(enrich_structural(c, {}), c);
    EXPECT_EQ(enrich_structural(c, {{"t1", "t1"}}), c);
}

TEST(EnrichStructural, UnknownIdNamesPair) {
    Corpus c({object("t1")});
    try {
        enrich_structural(c, {{"t1", "ghost"}});
        FAIL();
    } catch (const ValidationError& e) {
        std::string what = e.what();
        EXPECT_NE(what.find("t1"), std::string::npos);
        EXPECT_NE(what.find("ghost"), std::string::npos);
    }
}

TEST(EnrichStructural, LinkTableParsing) {
    std::istringstream in("a\tb\nc\td\n");
    auto links = parse_links(in);
    ASSERT_EQ(links.size(), 2u);
    EXPECT_EQ(links[1], (LinkPair{"c", "d"}));
    std::istringstream bad("a b\n");
    EXPECT_THROW(parse_links(bad), ParseError);
}

// --- conceptual -----------------------------------------------------------

TEST(EnrichConceptual, FixtureFillsObamaEntities) {
    const std::vector<std::string> expected{"Barack Obama", "Honolulu", "Hawaii", "United States",
                                            "44th President"};
    std::istringstream fixture(
        R"({"id":"obama","entities":["Barack Obama","Honolulu","Hawaii","United States","44th President"]})"
        "\n");
    auto extractor = FixtureExtractor::parse(fixture);
    Corpus c({object("obama", "Barack Obama was born in Honolulu, Hawaii.")});
    auto report = enrich_conceptual(c, extractor);
    EXPECT_EQ(report.corpus.lookup("obama").entities, expected);
    EXPECT_EQ(report.extracted, 1u);
}

TEST(EnrichConceptual, PrepopulatedObjectUntouched) {
    ListExtractor extractor(Table{{"a", {"Y"}}});
    Corpus c({object("a", "text", {}, {"X"})});
    auto report = enrich_conceptual(c, extractor);
    EXPECT_EQ(report.corpus.lookup("a").entities, std::vector<std::string>{"X"});
    EXPECT_EQ(extractor.calls.load(), 0);
    EXPECT_EQ(report.skipped, 1u);
}

TEST(EnrichConceptual, DuplicatesRemoved) {
    ListExtractor extractor(Table{{"a", {"A", "A", "B"}}});
    auto report = enrich_conceptual(Corpus({object("a")}), extractor);
    EXPECT_EQ(report.corpus.lookup("a").entities, (std::vector<std::string>{"A", "B"}));
}

TEST(EnrichConceptual, NormalizationHookIsOptIn) {
    EXPECT_EQ(dedup_entities({"New  York", "new york", "NEW York"}),
              (std::vector<std::string>{"New  York", "new york", "NEW York"}));
    EXPECT_EQ(dedup_entities({"New  York", "new york", "NEW York"}, true),
              std::vector<std::string>{"new york"});
    EXPECT_EQ(normalize_entity("  A\t B  "), "a b");
}

TEST(EnrichConceptual, FailuresReportedAndPassCompletes) {
    ListExtractor extractor(Table{{"a", {"E"}}});
    auto report = enrich_conceptual(Corpus({object("a"), object("b")}), extractor);
    EXPECT_EQ(report.corpus.lookup("a").entities, std::vector<std::string>{"E"});
    EXPECT_TRUE(report.corpus.lookup("b").entities.empty());
    ASSERT_EQ(report.failures.size(), 1u);
    EXPECT_EQ(report.failures[0].first, "b");
}

TEST(EnrichConceptual, FixtureRecordsMisses) {
    FixtureExtractor extractor(Table{{"a", {"E"}}});
    auto report = enrich_conceptual(Corpus({object("a"), object("b")}), extractor);
    EXPECT_TRUE(report.corpus.lookup("b").entities.empty());
    EXPECT_EQ(extractor.misses(), std::vector<std::string>{"b"});
}

TEST(EnrichConceptual, EachObjectVisitedOnceAcrossThreads) {
    std::map<std::string, std::vector<std::string>> table;
    std::vector<DataObject> objects;
    for (int i = 0; i < 64; ++i) {
        auto id = "o" + std::to_string(i);
        table[id] = {"E" + std::to_string(i % 7)};
        objects.push_back(object(id));
    }
    ListExtractor parallel_ex(table), serial_ex(table);
    auto parallel = enrich_conceptual(Corpus(objects), parallel_ex, {false, 8});
    auto serial = enrich_conceptual(Corpus(objects), serial_ex, {false, 1});
    EXPECT_EQ(parallel_ex.calls.load(), 64);
    EXPECT_EQ(parallel.corpus, serial.corpus);
}

// --- reply parsing and remote extractor -------------------------------------

TEST(EntityReply, Shapes) {
    using V = std::vector<std::string>;
    EXPECT_EQ(parse_entity_reply(R"(["A","B"])"), (V{"A", "B"}));
    EXPECT_EQ(parse_entity_reply(R"({"response":"[\"A\"]"})"), V{"A"});
    EXPECT_EQ(parse_entity_reply("Sure! Here you go: [\"Paris\", \"France\"] hope it helps"),
              (V{"Paris", "France"}));
    EXPECT_EQ(parse_entity_reply("[]"), V{});
    EXPECT_FALSE(parse_entity_reply("no list here"));
    EXPECT_FALSE(parse_entity_reply("[1, 2]"));
}

TEST(EntityPrompt, ContentSubstituted) {
    auto prompt = render_entity_prompt("Some passage.");
    EXPECT_NE(prompt.find("Some passage."), std::string::npos);
    EXPECT_EQ(prompt.find("{content}"), std::string::npos);
}

TEST(RemoteLlm, RetriesThenSucceeds) {
    int calls = 0;
    std::string last_body;
    RemoteLlmExtractor ex(fast_config(), [&](const std::string& body) {
        last_body = body;
        if (++calls < 3) return HttpReply{503, "busy"};
        return HttpReply{200, R"(["Honolulu"])"};
    });
    EXPECT_EQ(ex.extract(object("a", "born in Honolulu")), std::vector<std::string>{"Honolulu"});
    EXPECT_EQ(calls, 3);
    auto sent = nlohmann::json::parse(last_body);
    EXPECT_EQ(sent.at("model"), "gpt-4o");
    EXPECT_NE(sent.at("prompt").get<std::string>().find("born in Honolulu"), std::string::npos);
}

TEST(RemoteLlm, GivesUpAfterConfiguredRetries) {
    int calls = 0;
    auto config = fast_config();
    config.retries = 2;
    RemoteLlmExtractor ex(config, [&](const std::string&) -> HttpReply {
        ++calls;
        throw TransportError("connection refused");
    });
    EXPECT_THROW(ex.extract(object("a")), TransportError);
    EXPECT_EQ(calls, 3);  // first attempt + 2 retries
}

TEST(RemoteLlm, UnparseableReplyIsFailureWithoutRetry) {
    int calls = 0;
    RemoteLlmExtractor ex(fast_config(), [&](const std::string&) {
        ++calls;
        return HttpReply{200, "I cannot help with that"};
    });
    EXPECT_THROW(ex.extract(object("a")), Error);
    EXPECT_EQ(calls, 1);
}

TEST(RemoteLlm, RealHttpRoundTrip) {
    httplib::Server server;
    std::string auth;
    server.Post("/ner", [&](const httplib::Request& req, httplib::Response& res) {
        auth = req.get_header_value("Authorization");
        auto body = nlohmann::json::parse(req.body);
        const bool mentions = body.at("prompt").get<std::string>().find("Hawaii") != std::string::npos;
        res.set_content(mentions ? R"({"response":"[\"Hawaii\",\"Hawaii\"]"})" : "[]",
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto config = fast_config();
    config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/ner";
    config.token = "secret";
    RemoteLlmExtractor ex(config);
    auto report = enrich_conceptual(Corpus({object("h", "Hawaii is an island state")}), ex);
    server.stop();
    thread.join();

    EXPECT_EQ(report.corpus.lookup("h").entities, std::vector<std::string>{"Hawaii"});
    EXPECT_EQ(auth, "Bearer secret");
}

// --- contextual -------------------------------------------------------------

TEST(EnrichContextual, WindowOfTwo) {
    auto chunks = enrich_contextual({{"doc", "a b c d e", std::nullopt}}, {ChunkingConfig::Mode::split, 2});
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(chunks[0].content, "a b");
    EXPECT_EQ(chunks[1].content, "c d");
    EXPECT_EQ(chunks[2].content, "e");
    for (std::int64_t k = 0; k < 3; ++k) {
        EXPECT_EQ(chunks[k].chunk_id, k);
        EXPECT_EQ(chunks[k].doc_id, "doc");
        EXPECT_EQ(chunks[k].id, "doc#" + std::to_string(k));
    }
}

TEST(EnrichContextual, ExactWindowIsOneChunk) {
    auto chunks = enrich_contextual({{"d", "x y z", std::nullopt}}, {ChunkingConfig::Mode::split, 3});
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_EQ(chunks[0].chunk_id, 0);
}

TEST(EnrichContextual, NumberingRestartsPerDocument) {
    auto chunks = enrich_contextual({{"d1", "a b c", std::nullopt}, {"d2", "x y", std::nullopt}},
                                    {ChunkingConfig::Mode::split, 2});
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(chunks[2].doc_id, "d2");
    EXPECT_EQ(chunks[2].chunk_id, 0);
}

TEST(EnrichContextual, EmptyTextGivesNoChunks) {
    EXPECT_TRUE(enrich_contextual({{"d", "   ", std::nullopt}}, {}).empty());
}

TEST(EnrichContextual, PrechunkedPassThroughAndDuplicateRejected) {
    ChunkingConfig pre{ChunkingConfig::Mode::prechunked, 1};
    auto chunks = enrich_contextual({{"d", "first", 0}, {"d", "second", 1}}, pre);
    ASSERT_EQ(chunks.size(), 2u);
    EXPECT_EQ(chunks[1].content, "second");
    EXPECT_EQ(chunks[1].chunk_id, 1);
    EXPECT_THROW(enrich_contextual({{"d", "a", 0}, {"d", "b", 0}}, pre), ValidationError);
    EXPECT_THROW(enrich_contextual({{"d", "a", std::nullopt}}, pre), ValidationError);
}

TEST(EnrichContextual, ZeroWindowRejected) {
    EXPECT_THROW(enrich_contextual({{"d", "a", std::nullopt}}, {ChunkingConfig::Mode::split, 0}),
                 ConfigError);
}

// --- properties -------------------------------------------------------------

TEST(EnrichmentProperties, SplitChunksConcatenateToTokens) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::string text;
        std::vector<std::string> tokens;
        const int n = std::uniform_int_distribution<int>(1, 40)(rng);
        for (int i = 0; i < n; ++i) {
            tokens.push_back("w" + std::to_string(rng() % 100));
            text += tokens.back() + (rng() % 3 ? " " : " \t\n ");
        }
        const std::size_t window = std::uniform_int_distribution<std::size_t>(1, 9)(rng);
        auto chunks = enrich_contextual({{"d", text, std::nullopt}}, {ChunkingConfig::Mode::split, window});
        std::string joined;
        for (const auto& c : chunks) joined += (joined.empty() ? "" : " ") + c.content;
        std::string expected;
        for (const auto& t : tokens) expected += (expected.empty() ? "" : " ") + t;
        EXPECT_EQ(joined, expected);
        EXPECT_EQ(chunks.size(), (tokens.size() + window - 1) / window);
    }
}

TEST(EnrichmentProperties, Idempotent) {
    Corpus c({object("a"), object("b"), object("c")});
    std::vector<LinkPair> links{{"a", "b"}, {"b", "c"}, {"a", "b"}};
    auto once = enrich_structural(c, links);
    EXPECT_EQ(enrich_structural(once, links), once);

    ListExtractor ex(Table{{"a", {"X", "Y"}}, {"b", {"Y"}}, {"c", {"Z"}}});
    auto e1 = enrich_conceptual(once, ex).corpus;
    auto e2 = enrich_conceptual(e1, ex).corpus;
    EXPECT_EQ(e2, e1);
}

TEST(EnrichmentProperties, PartitionIndependence) {
    std::map<std::string, std::vector<std::string>> table;
    std::vector<DataObject> all, left, right;
    for (int i = 0; i < 20; ++i) {
        auto id = "o" + std::to_string(i);
        table[id] = {"E" + std::to_string(i % 3), "F"};
        all.push_back(object(id));
        (i % 2 ? left : right).push_back(object(id));
    }
    ListExtractor ex(table);
    auto whole = enrich_conceptual(Corpus(all), ex).corpus;
    auto l = enrich_conceptual(Corpus(left), ex).corpus;
    auto r = enrich_conceptual(Corpus(right), ex).corpus;
    for (const auto& o : whole) {
        const auto* part = l.find(o.id) ? l.find(o.id) : r.find(o.id);
        ASSERT_NE(part, nullptr);
        EXPECT_EQ(*part, o);
    }
}
