#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "narrative/error.hpp"
#include "narrative/graph_builder.hpp"

using namespace narrative;
using namespace narrative::builder;
using narrative::llm::ProviderRequest;

namespace {

llm::GatewayConfig live_cfg() {
    llm::GatewayConfig c;
    c.mode = llm::Mode::Live;
    c.retry_backoff_ms = 0;
    return c;
}

std::shared_ptr<llm::ScriptedProvider> script(std::function<std::string(const ProviderRequest&)> f) {
    return std::make_shared<llm::ScriptedProvider>(std::move(f));
}

ingest::Chunk chunk(std::string id, std::string text) {
    ingest::Chunk c;
    c.id = std::move(id);
    c.text = std::move(text);
    c.token_count = 5;
    c.source_labels = {{1, 1}};
    return c;
}

ExtractionRecord rec(std::string chunk_id, std::vector<ExtractedEntity> e, std::vector<ExtractedRelation> r) {
    return {std::move(chunk_id), std::move(e), std::move(r), 0};
}

}  // namespace

TEST(ParseExtraction, ToleratesProseAndQuotes) {
    auto p = parse_extraction(
        "Sure! Here you go:\n"
        "(\"entity\"<|>Hae Min Lee<|>PERSON<|>A high school senior (17) who disappeared)\n##\n"
        "(\"entity\"<|>\"Leakin Park\"<|>location<|>Park in Baltimore)##"
        "(\"relationship\"<|>Hae Min Lee<|>Leakin Park<|>Her body was found there<|>9)\n"
        "<|COMPLETE|> Hope this helps.");
    EXPECT_TRUE(p.complete);
    ASSERT_EQ(p.entities.size(), 2u);
    EXPECT_EQ(p.entities[0], (ExtractedEntity{"Hae Min Lee", "person", "A high school senior (17) who disappeared"}));
    EXPECT_EQ(p.entities[1].name, "Leakin Park");
    ASSERT_EQ(p.relations.size(), 1u);
    EXPECT_DOUBLE_EQ(p.relations[0].strength, 9.0);
}

TEST(ParseExtraction, EmptyAndGarbage) {
    EXPECT_FALSE(parse_extraction("I cannot help with that.").parseable());
    EXPECT_TRUE(parse_extraction("<|COMPLETE|>").parseable());
    auto p = parse_extraction("(\"relationship\"<|>A<|>B<|>x<|>strong)");
    ASSERT_EQ(p.relations.size(), 1u);
    EXPECT_DOUBLE_EQ(p.relations[0].strength, 1.0);
    EXPECT_TRUE(parse_extraction("(\"entity\"<|>  <|>person<|>blank)").entities.empty());
}

TEST(Gleaning, ZeroGleaningsIsOneRound) {
    int calls = 0;
    llm::Gateway gw(live_cfg(), script([&](const ProviderRequest&) {
                        ++calls;
                        return std::string("(\"entity\"<|>Jay<|>person<|>x)<|COMPLETE|>");
                    }));
    auto recs = extract_with_gleaning(chunk("c1", "Jay."), 0, gw, {"person"});
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].gleaning_round, 0);
    EXPECT_EQ(calls, 1);
}

TEST(Gleaning, StopsAfterRoundWithNothingNew) {
    int glean_calls = 0;
    llm::Gateway gw(live_cfg(), script([&](const ProviderRequest& r) -> std::string {
                        if (r.template_id == llm::tmpl::kExtract)
                            return "(\"entity\"<|>Hae Min Lee<|>person<|>Student)##"
                                   "(\"entity\"<|>Adnan Syed<|>person<|>Ex-boyfriend)<|COMPLETE|>";
                        ++glean_calls;
                        if (glean_calls == 1) return "(\"entity\"<|>hae min lee<|>person<|>Dup)##"
                                                     "(\"entity\"<|>Jay Wilds<|>person<|>Friend)<|COMPLETE|>";
                        return "(\"entity\"<|>Jay Wilds<|>person<|>Again)<|COMPLETE|>";
                    }));
    auto recs = extract_with_gleaning(chunk("c1", "text"), 5, gw, {"person"});
    ASSERT_EQ(recs.size(), 3u);
    EXPECT_EQ(recs[0].gleaning_round, 0);
    EXPECT_EQ(recs[1].gleaning_round, 1);
    EXPECT_EQ(recs[2].gleaning_round, 2);
    EXPECT_EQ(glean_calls, 2);
    auto g = assemble_graph(recs, 1);
    EXPECT_EQ(g.entities().size(), 3u);
    EXPECT_EQ(g.find_entity("hae min lee")->display_name, "Hae Min Lee");
    EXPECT_EQ(*g.find_entity("hae min lee")->description, "Dup\nStudent");
}

TEST(Gleaning, ReparseThenStructuredError) {
    int reparses = 0;
    llm::Gateway ok(live_cfg(), script([&](const ProviderRequest& r) -> std::string {
                        if (r.template_id == llm::tmpl::kExtractReparse) {
                            ++reparses;
                            return "(\"entity\"<|>Jay<|>person<|>x)<|COMPLETE|>";
                        }
                        return "Jay is a person.";
                    }));
    auto recs = extract_with_gleaning(chunk("c1", "Jay."), 0, ok, {"person"});
    EXPECT_EQ(reparses, 1);
    EXPECT_EQ(recs[0].entities.size(), 1u);

    llm::Gateway bad(live_cfg(), script([](const ProviderRequest& r) -> std::string {
                         return r.template_id == llm::tmpl::kExtractReparse ? "still prose" : "prose";
                     }));
    try {
        extract_with_gleaning(chunk("c9", "x"), 0, bad, {"person"});
        FAIL();
    } catch (const StructuredOutputError& e) {
        EXPECT_EQ(e.raw(), "still prose");
        EXPECT_NE(std::string(e.what()).find("c9"), std::string::npos);
    }
}

TEST(Assemble, SameRelationTwiceIsWeightTwo) {
    std::vector<ExtractionRecord> rs = {
        rec("c1", {{"Jay", "person", "a"}, {"Jenn", "person", "b"}}, {{"Jay", "Jenn", "called", 5}}),
        rec("c2", {}, {{"jay", "JENN", "called", 7}}),
    };
    auto g = assemble_graph(rs);
    ASSERT_EQ(g.triples().size(), 1u);
    const auto& t = g.triples().begin()->second;
    EXPECT_DOUBLE_EQ(t.weight, 2.0);
    EXPECT_EQ(t.relation, "called");
    EXPECT_EQ(t.evidence, (std::vector<std::string>{"c1", "c2"}));
}

TEST(Assemble, PruningThreshold) {
    std::vector<ExtractionRecord> rs = {
        rec("c1", {{"Once", "person", "x"}, {"Twice", "person", "y"}}, {}),
        rec("c2", {{"Twice", "person", "z"}}, {}),
    };
    auto g = assemble_graph(rs, 2);
    EXPECT_FALSE(g.has_entity("once"));
    EXPECT_TRUE(g.has_entity("twice"));
    EXPECT_TRUE(assemble_graph(rs, 1).has_entity("once"));
}

TEST(Assemble, FiveRecordFixtureMatchesHandMerge) {
    std::vector<ExtractionRecord> rs = {
        rec("c1", {{"Hae Min Lee", "person", "Student"}, {"Adnan Syed", "person", "Ex-boyfriend"}},
            {{"Adnan Syed", "Hae Min Lee", "Dated her", 8}}),
        rec("c2", {{"hae min lee", "PERSON", "Went missing"}, {"Leakin Park", "location", "Park"}},
            {{"Hae Min Lee", "Leakin Park", "Found there", 9}}),
        rec("c3", {{"Mr. S", "person", "Found the body"}}, {{"Mr. S", "Leakin Park", "Walked in", 6}}),
        rec("c4", {{"Adnan Syed", "person", "Convicted"}}, {{"Adnan Syed", "Hae Min Lee", "Dated her", 8}}),
        rec("c5", {{"Nisha", "person", "Friend"}}, {{"Adnan Syed", "Nisha", "Called", 3}}),
    };
    // Hand-merged expectation.
    kg::KnowledgeGraph expect;
    expect.put_entity({"hae min lee", "Hae Min Lee", "person", "Student\nWent missing"});
    expect.put_entity({"adnan syed", "Adnan Syed", "person", "Convicted\nEx-boyfriend"});
    expect.put_entity({"leakin park", "Leakin Park", "location", "Park"});
    expect.put_entity({"mr. s", "Mr. S", "person", "Found the body"});
    expect.put_entity({"nisha", "Nisha", "person", "Friend"});
    expect.upsert_triple({"adnan syed", "Dated her", "hae min lee", 2, {"c1", "c4"}});
    expect.upsert_triple({"hae min lee", "Found there", "leakin park", 1, {"c2"}});
    expect.upsert_triple({"mr. s", "Walked in", "leakin park", 1, {"c3"}});
    expect.upsert_triple({"adnan syed", "Called", "nisha", 1, {"c5"}});
    EXPECT_EQ(assemble_graph(rs), expect);

    std::mt19937 rng(4);
    for (int i = 0; i < 10; ++i) {
        std::shuffle(rs.begin(), rs.end(), rng);
        EXPECT_EQ(assemble_graph(rs), expect);
    }
}

TEST(Assemble, UnknownEndpointsBecomeEntitiesAndDescriptionsMerge) {
    std::vector<ExtractionRecord> rs = {
        rec("c1", {}, {{"Jay", "Cathy", "visited", 1}, {"Jay", "Cathy", "smoked at her house", 1}}),
    };
    auto g = assemble_graph(rs);
    EXPECT_TRUE(g.has_entity("cathy"));
    ASSERT_EQ(g.triples().size(), 1u);
    EXPECT_EQ(g.triples().begin()->second.relation, "smoked at her house\nvisited");
}

TEST(CommunityReportParse, JsonInsideProse) {
    auto r = parse_community_report(
        "Here is the report:\n```json\n{\"title\": \"Mosque\", \"summary\": \"S\", \"findings\": [\"a\", "
        "{\"summary\": \"b\", \"explanation\": \"c\"}]}\n```");
    EXPECT_EQ(r.title, "Mosque");
    EXPECT_EQ(r.summary, "S");
    EXPECT_EQ(r.key_findings, (std::vector<std::string>{"a", "b: c"}));
    EXPECT_THROW(parse_community_report("no json"), StructuredOutputError);
    EXPECT_THROW(parse_community_report("{\"title\": 1}"), StructuredOutputError);
}

namespace {

std::string report_responder(const ProviderRequest& r) {
    if (r.template_id == llm::tmpl::kCommunityReport)
        return R"({"title": "T", "summary": "community summary", "findings": ["f1"]})";
    return "merged summary";
}

kg::KnowledgeGraph small_graph() {
    kg::KnowledgeGraph g;
    g.upsert_triple({"a", "knows", "b", 1, {"c1"}});
    g.upsert_triple({"b", "knows", "c", 1, {"c1"}});
    g.upsert_triple({"d", "x\ny", "e", 2, {"c2"}});
    g.add_entity("loner", std::string("person"), std::string("one\ntwo"));
    return g;
}

}  // namespace

TEST(Reports, OnePerBlockAndTopDownIds) {
    auto g = small_graph();
    kg::Hierarchy h{{{{"a", "b"}, {"c"}, {"d", "e"}, {"loner"}}, {{"a", "b", "c"}, {"d", "e"}, {"loner"}}}};
    g.set_hierarchy(h);
    llm::Gateway gw(live_cfg(), script(report_responder));
    auto reps = generate_reports(g, *g.hierarchy(), gw);
    ASSERT_EQ(reps.communities.size(), 7u);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(reps.communities[i].level, 2);
    for (int i = 3; i < 7; ++i) EXPECT_EQ(reps.communities[i].level, 1);
    for (int i = 0; i < 7; ++i) EXPECT_EQ(reps.communities[i].community_id, i);
    bool single = false;
    for (const auto& r : reps.communities) {
        if (r.members.size() == 1) single = true;
        EXPECT_EQ(r.summary, "community summary");
        for (const auto& m : r.members) EXPECT_TRUE(g.has_entity(m));
    }
    EXPECT_TRUE(single);
    EXPECT_EQ(reps.entity_summaries.at("loner"), "merged summary");
    EXPECT_EQ(reps.entity_summaries.at("a"), "");
    EXPECT_EQ(reps.relation_summaries.at({"a", "knows", "b"}), "knows");
    EXPECT_EQ(reps.relation_summaries.at({"d", "x\ny", "e"}), "merged summary");
}

TEST(Reports, CacheMissCarriesCommunityContext) {
    auto g = small_graph();
    kg::Hierarchy h{{{{"a", "b", "c", "d", "e", "loner"}}}};
    g.set_hierarchy(h);
    // Record entity/relation summaries but not the report.
    llm::Gateway rec(live_cfg(), script(report_responder));
    auto path = std::filesystem::temp_directory_path() / "narrative_reports_ctx.jsonl";
    std::filesystem::remove(path);
    llm::GatewayConfig rc = live_cfg();
    rc.mode = llm::Mode::Record;
    rc.cassette_path = path;
    llm::Gateway recorder(rc, script([](const ProviderRequest& r) -> std::string {
                              if (r.template_id == llm::tmpl::kCommunityReport) throw TransportError("down");
                              return "merged summary";
                          }));
    EXPECT_THROW(generate_reports(g, *g.hierarchy(), recorder), TransportError);
    recorder.save();
    llm::GatewayConfig replay;
    replay.cassette_path = path;
    llm::Gateway gw(replay);
    try {
        generate_reports(g, *g.hierarchy(), gw);
        FAIL();
    } catch (const CacheMissError& e) {
        EXPECT_NE(std::string(e.what()).find("community 0"), std::string::npos);
    }
}

TEST(BuildGraphRag, EndToEndWithScriptedModelAndRoundTrip) {
    std::vector<ingest::Chunk> chunks = {chunk("chunk_0001", "Adnan and Hae"), chunk("chunk_0002", "Jay and Jenn")};
    auto responder = [](const ProviderRequest& r) -> std::string {
        if (r.template_id == llm::tmpl::kExtract) {
            if (r.prompt.find("Adnan and Hae") != std::string::npos)
                return "(\"entity\"<|>Adnan<|>person<|>A)##(\"entity\"<|>Hae<|>person<|>H)##"
                       "(\"relationship\"<|>Adnan<|>Hae<|>dated<|>8)<|COMPLETE|>";
            return "(\"entity\"<|>Jay<|>person<|>J)##(\"entity\"<|>Jenn<|>person<|>N)##"
                   "(\"relationship\"<|>Jay<|>Jenn<|>friends<|>6)<|COMPLETE|>";
        }
        if (r.template_id == llm::tmpl::kGlean) return "<|COMPLETE|>";
        return report_responder(r);
    };
    llm::Gateway gw(live_cfg(), script(responder));
    BuildConfig cfg;
    auto b = build_graphrag(chunks, cfg, gw);
    EXPECT_EQ(b.graph.entities().size(), 4u);
    ASSERT_TRUE(b.graph.hierarchy());
    std::size_t blocks = 0;
    for (const auto& p : b.graph.hierarchy()->levels) blocks += p.size();
    EXPECT_EQ(b.reports.communities.size(), blocks);
    EXPECT_EQ(b.records.size(), 4u);  // two rounds per chunk

    auto dir = std::filesystem::temp_directory_path() / "narrative_build_rt";
    std::filesystem::remove_all(dir);
    save_build(b, dir);
    auto back = load_build(dir);
    EXPECT_EQ(back.graph, b.graph);
    EXPECT_EQ(back.records, b.records);
    EXPECT_EQ(back.reports.communities, b.reports.communities);
    EXPECT_EQ(back.reports.entity_summaries, b.reports.entity_summaries);
    EXPECT_EQ(back.reports.relation_summaries, b.reports.relation_summaries);
    EXPECT_EQ(back.seed, 42u);
    EXPECT_THROW(load_build(dir / "nope"), NotFoundError);
}
