#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "narrative/error.hpp"
#include "narrative/graph_io.hpp"

using namespace narrative;
using namespace narrative::kg;

namespace {

KnowledgeGraph roundtrip(const KnowledgeGraph& g, GraphFormat f) {
    std::stringstream ss;
    export_graph(g, f, ss);
    return import_graph(f, ss);
}

std::size_t count_substr(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST(GraphFormatTest, ParsesNamesAndListsSupported) {
    EXPECT_EQ(parse_graph_format("GraphML"), GraphFormat::GraphML);
    EXPECT_EQ(parse_graph_format("triples-csv"), GraphFormat::TriplesCsv);
    try {
        parse_graph_format("gexf");
        FAIL();
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("graphml"), std::string::npos);
        EXPECT_NE(msg.find("dot"), std::string::npos);
        EXPECT_NE(msg.find("csv"), std::string::npos);
    }
}

TEST(GraphIo, TwoNodeDotHasOneEdgeStatement) {
    KnowledgeGraph g;
    g.upsert_triple({"Jane", "called", "the post office", 1.0, {}});
    std::stringstream ss;
    export_graph(g, GraphFormat::Dot, ss);
    EXPECT_EQ(count_substr(ss.str(), "->"), 1u);
}

TEST(GraphIo, HierarchyLevelsBecomeNodeAttributes) {
    KnowledgeGraph g;
    g.upsert_triple({"a", "r", "b", 1.0, {}});
    g.upsert_triple({"c", "r", "d", 1.0, {}});
    g.set_hierarchy(Hierarchy{{{{"a"}, {"b"}, {"c", "d"}}, {{"a", "b"}, {"c", "d"}}}});
    std::stringstream gml;
    export_graph(g, GraphFormat::GraphML, gml);
    EXPECT_EQ(count_substr(gml.str(), "<data key=\"level_1\">"), 4u);
    EXPECT_EQ(count_substr(gml.str(), "<data key=\"level_2\">"), 4u);
    std::stringstream dot;
    export_graph(g, GraphFormat::Dot, dot);
    EXPECT_EQ(count_substr(dot.str(), "level_1="), 4u);
    EXPECT_EQ(count_substr(dot.str(), "level_2="), 4u);
}

TEST(GraphIo, TrickyTextSurvivesAllFormats) {
    KnowledgeGraph g;
    g.add_entity("Mr. S", std::string("PERSON"), std::string("Found the body <near> \"the\" road & said: \\n ok\nline 2"));
    g.add_entity("Leakin Park", std::string(""), std::string("  padded  "));
    g.upsert_triple({"Mr. S", "found body in, \"quoted\"\nsecond line", "Leakin Park", 0.1 + 0.2, {"chunk_0001", "2_51"}});
    g.set_hierarchy(Hierarchy{{{{"mr. s"}, {"leakin park"}}}});
    EXPECT_EQ(roundtrip(g, GraphFormat::GraphML), g);
    EXPECT_EQ(roundtrip(g, GraphFormat::Dot), g);

    KnowledgeGraph plain;
    plain.upsert_triple({"Mr. S", "found body in, \"quoted\"\nsecond line", "Leakin Park", 0.1 + 0.2, {"chunk_0001"}});
    plain.add_entity("Isolated One");
    EXPECT_EQ(roundtrip(plain, GraphFormat::TriplesCsv), plain);
}

TEST(GraphIo, MalformedInputs) {
    std::istringstream bad_dot("graph { a -- b }");
    EXPECT_THROW(import_graph(GraphFormat::Dot, bad_dot), ParseError);
    std::istringstream bad_xml("<graphml><graph><node id=\"a\">");
    EXPECT_THROW(import_graph(GraphFormat::GraphML, bad_xml), ParseError);
    std::istringstream dangling("digraph g { \"a\"; \"a\" -> \"b\" [label=\"r\"]; }");
    EXPECT_THROW(import_graph(GraphFormat::Dot, dangling), ParseError);
}

TEST(GraphIo, RandomGraphRoundTripProperty) {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        KnowledgeGraph g;
        const int n = 30;
        for (int i = 0; i < n; ++i) g.add_entity("Node " + std::to_string(i));
        for (int e = 0; e < 60; ++e)
            g.upsert_triple({"Node " + std::to_string(rng() % n), "rel" + std::to_string(rng() % 4),
                             "Node " + std::to_string(rng() % n), static_cast<double>(1 + rng() % 5),
                             {"chunk_" + std::to_string(rng() % 9)}});
        EXPECT_EQ(roundtrip(g, GraphFormat::TriplesCsv), g);
        Partition fine, coarse;
        for (int i = 0; i < n; i += 3) {
            Block b;
            for (int k = i; k < std::min(n, i + 3); ++k) b.push_back("node " + std::to_string(k));
            fine.push_back(b);
        }
        for (int i = 0; i < n; i += 9) {
            Block b;
            for (int k = i; k < std::min(n, i + 9); ++k) b.push_back("node " + std::to_string(k));
            coarse.push_back(b);
        }
        g.set_hierarchy(Hierarchy{{fine, coarse}});
        EXPECT_EQ(roundtrip(g, GraphFormat::GraphML), g);
        EXPECT_EQ(roundtrip(g, GraphFormat::Dot), g);
    }
}
