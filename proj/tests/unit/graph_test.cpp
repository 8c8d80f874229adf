#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "grapher/errors.hpp"
#include "grapher/graph.hpp"
#include "support.hpp"

using namespace grapher;
using grapher::testing::chunk;
using grapher::testing::object;

namespace {
using Ids = std::vector<std::string>;

Corpus schema_corpus() {
    return Corpus({object("stores", "", {"employees"}), object("orders", "", {"customers"}),
                   object("customers", "", {"orders"}), object("employees", "", {"stores"})});
}
}  // namespace

TEST(Structural, SingleOrdersCustomersEdge) {
    Ids ids{"stores", "orders", "customers"};
    auto g = build_structural(ids, schema_corpus());
    EXPECT_EQ(g.size(), 3u);
    EXPECT_EQ(g.edge_count(), 2u);  // one undirected edge, both directions
    EXPECT_EQ(g.adjacency(1, 2), 1.0);
    EXPECT_EQ(g.adjacency(2, 1), 1.0);
    EXPECT_TRUE(g.adjacency.is_symmetric());
}

TEST(Structural, NoLinksGivesZeroMatrix) {
    Corpus c({object("a"), object("b")});
    Ids ids{"a", "b"};
    EXPECT_EQ(build_structural(ids, c).adjacency, SquareMatrix(2, 0.0));
}

TEST(Structural, LinkToNonCandidateIgnored) {
    Ids ids{"stores", "orders"};
    auto g = build_structural(ids, schema_corpus());
    EXPECT_EQ(g.adjacency, SquareMatrix(2, 0.0));
}

TEST(Structural, OneSidedLinkIsSymmetric) {
    Corpus c({object("a", "", {"b"}), object("b")});
    Ids ids{"a", "b"};
    auto g = build_structural(ids, c);
    EXPECT_EQ(g.adjacency(1, 0), 1.0);
}

TEST(Structural, UnknownCandidateRejected) {
    Ids ids{"stores", "ghost"};
    EXPECT_THROW(build_structural(ids, schema_corpus()), Error);
}

TEST(Conceptual, AsymmetricWeights) {
    Corpus c({object("i", "", {}, {"A", "B", "C"}), object("j", "", {}, {"B", "C", "D", "E"})});
    Ids ids{"i", "j"};
    auto g = build_conceptual(ids, c);
    EXPECT_EQ(g.adjacency(0, 1), 2.0 / 4.0);
    EXPECT_EQ(g.adjacency(1, 0), 2.0 / 3.0);
    EXPECT_EQ(g.adjacency(0, 0), 0.0);
    EXPECT_FALSE(g.adjacency.is_symmetric());
}

TEST(Conceptual, DisjointAndEmptySets) {
    Corpus c({object("i", "", {}, {"A"}), object("j", "", {}, {"B"}), object("k")});
    Ids ids{"i", "j", "k"};
    auto g = build_conceptual(ids, c);
    EXPECT_EQ(g.adjacency, SquareMatrix(3, 0.0));
}

TEST(Contextual, AdjacencyRules) {
    Corpus c({chunk("d1c0", "doc1", 0), chunk("d1c1", "doc1", 1), chunk("d1c2", "doc1", 2),
              chunk("d2c2", "doc2", 2), object("plain")});
    Ids ids{"d1c0", "d1c1", "d1c2", "d2c2", "plain"};
    auto g = build_contextual(ids, c);
    EXPECT_EQ(g.adjacency(0, 1), 1.0);
    EXPECT_EQ(g.adjacency(1, 2), 1.0);
    EXPECT_EQ(g.adjacency(0, 2), 0.0);
    EXPECT_EQ(g.adjacency(1, 3), 0.0);
    EXPECT_EQ(g.adjacency(2, 3), 0.0);
    EXPECT_EQ(g.edge_count(), 4u);
    EXPECT_TRUE(g.adjacency.is_symmetric());
}

TEST(BuildGraph, DispatchAndUnion) {
    auto corpus = schema_corpus();
    Ids ids{"stores", "orders", "customers"};
    EXPECT_EQ(build_graph(ids, corpus, ProximityScheme::structural).adjacency,
              build_structural(ids, corpus).adjacency);

    Corpus entity_corpus({object("i", "", {}, {"A", "B", "C"}), object("j", "", {}, {"B", "C", "D", "E"})});
    Ids ij{"i", "j"};
    EXPECT_EQ(build_graph(ij, entity_corpus, ProximityScheme::union_max).adjacency,
              build_conceptual(ij, entity_corpus).adjacency);

    Corpus both({object("i", "", {"j"}, {"A", "B", "C"}), object("j", "", {"i"}, {"B", "C", "D", "E"})});
    auto u = build_graph(ij, both, ProximityScheme::union_max);
    EXPECT_EQ(u.adjacency(0, 1), 1.0);
    EXPECT_EQ(u.adjacency(1, 0), 1.0);
}

TEST(BuildGraph, SchemeNames) {
    EXPECT_EQ(parse_scheme("union"), ProximityScheme::union_max);
    EXPECT_EQ(parse_scheme("contextual"), ProximityScheme::contextual);
    EXPECT_THROW(parse_scheme("knowledge"), ConfigError);
    for (auto s : {ProximityScheme::structural, ProximityScheme::conceptual,
                   ProximityScheme::contextual, ProximityScheme::union_max}) {
        EXPECT_EQ(parse_scheme(to_string(s)), s);
    }
}

TEST(DumpGraph, NonZeroEntriesOnly) {
    Ids ids{"stores", "orders", "customers"};
    auto j = dump_graph(build_structural(ids, schema_corpus()));
    EXPECT_EQ(j.at("ids"), nlohmann::json(ids));
    EXPECT_EQ(j.at("edges").size(), 2u);
    EXPECT_EQ(j.at("edges")[0], nlohmann::json({1, 2, 1.0}));
}

TEST(GraphProperties, PermutationEquivariance) {
    std::mt19937 rng(21);
    std::vector<DataObject> objects;
    const int n = 25;
    for (int i = 0; i < n; ++i) {
        auto o = object("o" + std::to_string(i));
        for (int k = 0; k < 3; ++k) o.add_entity("E" + std::to_string(rng() % 8));
        int j = rng() % n;
        if (j != i) o.add_link("o" + std::to_string(j));
        o.doc_id = "d" + std::to_string(i % 3);
        o.chunk_id = i / 3;
        objects.push_back(o);
    }
    Corpus corpus(objects);
    Ids ids;
    for (int i = 0; i < n; ++i) ids.push_back("o" + std::to_string(i));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Ids permuted;
    for (auto p : perm) permuted.push_back(ids[p]);

    for (auto scheme : {ProximityScheme::structural, ProximityScheme::conceptual,
                        ProximityScheme::contextual, ProximityScheme::union_max}) {
        auto g = build_graph(ids, corpus, scheme);
        auto h = build_graph(permuted, corpus, scheme);
        ASSERT_GT(g.edge_count(), 0u);
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                EXPECT_EQ(h.adjacency(a, b), g.adjacency(perm[a], perm[b]));
            }
        }
    }
}

TEST(GraphProperties, WeightsBoundedAndDiagonalZero) {
    std::mt19937 rng(4);
    std::vector<DataObject> objects;
    for (int i = 0; i < 30; ++i) {
        auto o = object("o" + std::to_string(i));
        const int m = rng() % 6;
        for (int k = 0; k < m; ++k) o.add_entity("E" + std::to_string(rng() % 10));
        if (i > 0) o.add_link("o" + std::to_string(rng() % i));
        objects.push_back(o);
    }
    Corpus corpus(objects);
    Ids ids;
    for (const auto& o : corpus) ids.push_back(o.id);
    for (auto scheme : {ProximityScheme::structural, ProximityScheme::conceptual}) {
        auto g = build_graph(ids, corpus, scheme);
        for (std::size_t a = 0; a < g.size(); ++a) {
            EXPECT_EQ(g.adjacency(a, a), 0.0);
            for (std::size_t b = 0; b < g.size(); ++b) {
                EXPECT_GE(g.adjacency(a, b), 0.0);
                EXPECT_LE(g.adjacency(a, b), 1.0);
                if (scheme == ProximityScheme::structural) {
                    EXPECT_TRUE(g.adjacency(a, b) == 0.0 || g.adjacency(a, b) == 1.0);
                }
            }
        }
    }
    EXPECT_TRUE(build_structural(ids, corpus).adjacency.is_symmetric());
}
