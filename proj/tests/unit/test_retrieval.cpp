#include <gtest/gtest.h>

#include <mutex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "narrative/error.hpp"
#include "narrative/retrieval.hpp"
#include "narrative/text.hpp"

using namespace narrative;
using namespace narrative::retrieval;
using narrative::llm::ProviderRequest;

namespace {

llm::GatewayConfig live_cfg() {
    llm::GatewayConfig c;
    c.mode = llm::Mode::Live;
    c.retry_backoff_ms = 0;
    return c;
}

// Records every prompt per template and answers from a table.
struct Capture {
    std::mutex mu;
    std::map<std::string, std::vector<std::string>> prompts;
    std::map<std::string, std::string> replies;
    std::function<std::string(const ProviderRequest&)> map_reply;

    std::shared_ptr<llm::Provider> provider() {
        return std::make_shared<llm::ScriptedProvider>([this](const ProviderRequest& r) -> std::string {
            std::lock_guard lock(mu);
            prompts[r.template_id].push_back(r.prompt);
            if (r.template_id == llm::tmpl::kGlobalMap && map_reply) return map_reply(r);
            auto it = replies.find(r.template_id);
            return it == replies.end() ? "ok" : it->second;
        });
    }
};

ingest::Chunk chunk(std::string id, std::string text) {
    ingest::Chunk c;
    c.id = std::move(id);
    c.text = std::move(text);
    c.token_count = static_cast<int>(text::word_count(c.text));
    return c;
}

builder::GraphRagBuild fixture_build() {
    builder::GraphRagBuild b;
    auto& g = b.graph;
    g.put_entity({"hae min lee", "Hae Min Lee", "person", "Student who disappeared"});
    g.put_entity({"adnan syed", "Adnan Syed", "person", "Former boyfriend"});
    g.put_entity({"leakin park", "Leakin Park", "location", "Park in Baltimore"});
    g.put_entity({"jay wilds", "Jay Wilds", "person", "Friend who testified"});
    g.put_entity({"best buy", "Best Buy", "location", "Store with a pay phone"});
    g.upsert_triple({"adnan syed", "dated", "hae min lee", 2, {"chunk_0001"}});
    g.upsert_triple({"hae min lee", "found in", "leakin park", 1, {"chunk_0002"}});
    g.upsert_triple({"jay wilds", "testified against", "adnan syed", 3, {"chunk_0003"}});
    g.upsert_triple({"jay wilds", "mentioned", "best buy", 1, {"chunk_0003"}});
    kg::Hierarchy h{{{{"adnan syed", "hae min lee", "leakin park"}, {"best buy", "jay wilds"}},
                     {{"adnan syed", "best buy", "hae min lee", "jay wilds", "leakin park"}}}};
    g.set_hierarchy(h);
    for (const auto& [id, e] : g.entities()) b.reports.entity_summaries[id] = *e.description;
    for (const auto& [key, t] : g.triples()) b.reports.relation_summaries[key] = t.relation;
    b.reports.communities = {
        {0, 2, {"adnan syed", "best buy", "hae min lee", "jay wilds", "leakin park"}, "Case", "The whole case.", {"f"}},
        {1, 1, {"adnan syed", "hae min lee", "leakin park"}, "Victim", "Hae and Adnan.", {}},
        {2, 1, {"best buy", "jay wilds"}, "Witness", "Jay and the store.", {}},
    };
    b.records = {{"chunk_0001", {{"Hae Min Lee", "person", ""}, {"Adnan Syed", "person", ""}}, {}, 0},
                 {"chunk_0003", {{"Jay Wilds", "person", ""}}, {}, 0}};
    return b;
}

std::vector<ingest::Chunk> fixture_chunks() {
    return {chunk("chunk_0001", "Adnan and Hae dated in high school."),
            chunk("chunk_0002", "Her body was found in Leakin Park weeks later."),
            chunk("chunk_0003", "Jay said they were at the Best Buy pay phone.")};
}

std::string data_section(const std::string& prompt) {
    auto a = prompt.find("-Data-");
    auto b = prompt.find("-Question-");
    return prompt.substr(a, b - a);
}

}  // namespace

TEST(Retrieval, ModeNamesAndAnswerJson) {
    for (auto m : {QueryMode::Local, QueryMode::Global, QueryMode::NaiveRag, QueryMode::NaiveLlm})
        EXPECT_EQ(parse_query_mode(query_mode_name(m)), m);
    EXPECT_THROW(parse_query_mode("hybrid"), ValidationError);
    Answer a{"q?", QueryMode::Local, "text", {{"a"}, {1, 2}, {"chunk_0001"}}, true};
    nlohmann::json j = a;
    EXPECT_EQ(j["mode"], "local");
    EXPECT_EQ(j.get<Answer>(), a);
}

TEST(Retrieval, RefusalDetection) {
    EXPECT_TRUE(is_refusal("The data provided does not specify whether a hammer was used."));
    EXPECT_TRUE(is_refusal(kGlobalNoData));
    EXPECT_FALSE(is_refusal("It is mentioned that Adnan Syed's DNA was not found on the hammer."));
}

TEST(Local, NamedEntityIsInContextRefs) {
    auto b = fixture_build();
    auto chunks = fixture_chunks();
    Capture cap;
    llm::Gateway gw(live_cfg(), cap.provider());
    Retriever r(b, chunks, gw);
    for (const auto& [id, e] : b.graph.entities()) {
        LocalOptions o;
        o.k = 1;
        auto a = r.query_local("What do we know about " + e.display_name + "?", o);
        EXPECT_EQ(a.context_refs.entities.front(), id) << id;
        EXPECT_EQ(a.mode, QueryMode::Local);
    }
}

TEST(Local, RefsExistAndContextComesFromArtifacts) {
    auto b = fixture_build();
    auto chunks = fixture_chunks();
    Capture cap;
    llm::Gateway gw(live_cfg(), cap.provider());
    Retriever r(b, chunks, gw);
    LocalOptions o;
    o.k = 2;
    auto a = r.query_local("Where was Hae Min Lee found?", o);
    ASSERT_FALSE(a.context_refs.entities.empty());
    for (const auto& e : a.context_refs.entities) EXPECT_TRUE(b.graph.has_entity(e));
    for (int c : a.context_refs.communities) EXPECT_LT(c, 3);
    for (const auto& c : a.context_refs.chunks) EXPECT_TRUE(c == "chunk_0001" || c == "chunk_0002" || c == "chunk_0003");
    // Neighbour expansion pulls in Leakin Park, and the chunk evidencing it.
    const auto& ents = a.context_refs.entities;
    EXPECT_NE(std::find(ents.begin(), ents.end(), "leakin park"), ents.end());
    auto data = data_section(cap.prompts[llm::tmpl::kLocalAnswer].back());
    EXPECT_NE(data.find("Student who disappeared"), std::string::npos);
    for (const auto& c : a.context_refs.chunks) {
        auto it = std::find_if(chunks.begin(), chunks.end(), [&](const auto& x) { return x.id == c; });
        EXPECT_NE(data.find(it->text), std::string::npos);
    }
}

TEST(Local, BudgetTruncatesByPriorityWholeItemsOnly) {
    auto b = fixture_build();
    auto chunks = fixture_chunks();
    Capture cap;
    llm::Gateway gw(live_cfg(), cap.provider());
    Retriever r(b, chunks, gw);
    LocalOptions o;
    o.k = 1;
    o.budget = 8;  // the first entity line is 7 words; nothing else fits after it
    auto a = r.query_local("Hae Min Lee", o);
    EXPECT_EQ(a.context_refs.entities, (std::vector<std::string>{"hae min lee"}));
    EXPECT_TRUE(a.context_refs.chunks.empty());
    EXPECT_TRUE(a.context_refs.communities.empty());
    auto data = data_section(cap.prompts[llm::tmpl::kLocalAnswer].back());
    EXPECT_NE(data.find("hae min lee|Hae Min Lee|Student who disappeared"), std::string::npos);
    EXPECT_EQ(data.find("Relationships"), std::string::npos);

    o.budget = 10000;
    auto full = r.query_local("Hae Min Lee", o);
    EXPECT_FALSE(full.context_refs.communities.empty());
    EXPECT_FALSE(full.context_refs.chunks.empty());
}

TEST(Local, ErrorsAndDecline) {
    auto b = fixture_build();
    auto chunks = fixture_chunks();
    Capture cap;
    cap.replies[llm::tmpl::kLocalAnswer] = "The data provided does not specify whether a hammer was involved.";
    llm::Gateway gw(live_cfg(), cap.provider());
    Retriever r(b, chunks, gw);
    LocalOptions zero;
    zero.k = 0;
    EXPECT_THROW(r.query_local("x", zero), ValidationError);
    auto a = r.query_local("Was a hammer found in the car?");
    EXPECT_TRUE(a.declined);
    EXPECT_TRUE(is_refusal(a.text));

    builder::GraphRagBuild empty;
    Retriever e(empty, chunks, gw);
    EXPECT_THROW(e.query_local("x"), ValidationError);
}

TEST(Global, SingleReportIsCited) {
    Capture cap;
    cap.map_reply = [](const ProviderRequest&) {
        return std::string(R"({"points": [{"description": "Hae was a student.", "score": 70}]})");
    };
    cap.replies[llm::tmpl::kGlobalReduce] = "Hae was a student [Data: Reports (5)].";
    llm::Gateway gw(live_cfg(), cap.provider());
    std::vector<builder::CommunityReport> reports = {{5, 1, {"hae min lee"}, "Hae", "Student.", {}}};
    auto a = query_global("Who was Hae?", reports, {}, gw);
    EXPECT_EQ(a.context_refs.communities, (std::vector<int>{5}));
    EXPECT_FALSE(a.declined);
    EXPECT_NE(cap.prompts[llm::tmpl::kGlobalReduce].back().find("Hae was a student."), std::string::npos);
}

TEST(Global, ReduceKeepsHigherScoreUnderTightBudget) {
    std::vector<MapPoint> pts = {{1, "low value point here", 10}, {2, "high value point here", 80}};
    auto kept = select_points(pts, 4);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].score, 80);

    Capture cap;
    cap.map_reply = [](const ProviderRequest& r) -> std::string {
        if (r.prompt.find("Alpha") != std::string::npos)
            return R"({"points": [{"description": "low value point here", "score": 10}]})";
        return R"(Sure: {"points": [{"description": "high value point here", "score": "80"}]})";
    };
    llm::Gateway gw(live_cfg(), cap.provider());
    std::vector<builder::CommunityReport> reports = {{0, 1, {"a"}, "Alpha", "A.", {}}, {1, 1, {"b"}, "Beta", "B.", {}}};
    GlobalOptions o;
    o.budget = 4;
    auto a = query_global("q", reports, o, gw);
    EXPECT_EQ(a.context_refs.communities, (std::vector<int>{1}));
    auto reduce = cap.prompts[llm::tmpl::kGlobalReduce].back();
    EXPECT_NE(reduce.find("high value"), std::string::npos);
    EXPECT_EQ(reduce.find("low value"), std::string::npos);
}

TEST(Global, EmptyMapDeclinesWithoutReduce) {
    Capture cap;
    cap.map_reply = [](const ProviderRequest& r) -> std::string {
        return r.prompt.find("Alpha") != std::string::npos ? R"({"points": []})" : "not json at all";
    };
    llm::Gateway gw(live_cfg(), cap.provider());
    std::vector<builder::CommunityReport> reports = {{0, 1, {"a"}, "Alpha", "A.", {}}, {1, 1, {"b"}, "Beta", "B.", {}}};
    auto a = query_global("Where is the hammer?", reports, {}, gw);
    EXPECT_TRUE(a.declined);
    EXPECT_EQ(a.text, kGlobalNoData);
    EXPECT_TRUE(a.context_refs.empty());
    EXPECT_EQ(cap.prompts.count(llm::tmpl::kGlobalReduce), 0u);
}

TEST(Global, LevelSelection) {
    auto b = fixture_build();
    Capture cap;
    cap.map_reply = [](const ProviderRequest&) { return std::string(R"({"points": [{"description": "p", "score": 50}]})"); };
    llm::Gateway gw(live_cfg(), cap.provider());
    auto top = query_global("q", b.reports.communities, {}, gw);
    EXPECT_EQ(top.context_refs.communities, (std::vector<int>{0}));
    GlobalOptions fine;
    fine.level = 1;
    EXPECT_EQ(query_global("q", b.reports.communities, fine, gw).context_refs.communities, (std::vector<int>{1, 2}));
    GlobalOptions missing;
    missing.level = 3;
    EXPECT_THROW(query_global("q", b.reports.communities, missing, gw), ValidationError);
}

TEST(NaiveRag, SingleChunkTieBreakAndClamp) {
    Capture cap;
    llm::Gateway gw(live_cfg(), cap.provider());
    std::vector<ingest::Chunk> one = {chunk("chunk_0001", "only text")};
    EmbeddingIndex idx1({"chunk_0001"}, {"only text"}, gw);
    auto a = query_naive_rag("anything", one, idx1, 1, gw);
    EXPECT_EQ(a.context_refs.chunks, (std::vector<std::string>{"chunk_0001"}));
    EXPECT_NE(cap.prompts[llm::tmpl::kNaiveRag].back().find("only text"), std::string::npos);

    // Identical texts tie exactly; the smaller id wins regardless of order.
    std::vector<ingest::Chunk> twins = {chunk("chunk_0002", "same words"), chunk("chunk_0001", "same words")};
    EmbeddingIndex idx2({"chunk_0002", "chunk_0001"}, {"same words", "same words"}, gw);
    auto t = query_naive_rag("same words", twins, idx2, 5, gw);  // k clamps to 2
    EXPECT_EQ(t.context_refs.chunks, (std::vector<std::string>{"chunk_0001", "chunk_0002"}));
    EXPECT_THROW(query_naive_rag("x", twins, idx2, 0, gw), ValidationError);
}

TEST(NaiveRag, LexicalMatchRanksFirst) {
    std::vector<ingest::Chunk> chunks;
    for (int i = 1; i <= 20; ++i)
        chunks.push_back(chunk(fmt::format("chunk_{:04d}", i), fmt::format("ordinary filler sentence number {} about school", i)));
    chunks[6].text = "the nisha call lasted two minutes from the cell phone";
    auto b = fixture_build();
    Capture cap;
    llm::Gateway gw(live_cfg(), cap.provider());
    Retriever r(b, chunks, gw);
    auto a = r.query_naive_rag("How long did the Nisha call last on the cell phone?", 3);
    ASSERT_EQ(a.context_refs.chunks.size(), 3u);
    EXPECT_EQ(a.context_refs.chunks[0], "chunk_0007");
}

TEST(NaiveLlm, NoContextAndReplayDeterminism) {
    auto path = std::filesystem::temp_directory_path() / "narrative_naive_llm.jsonl";
    std::filesystem::remove(path);
    auto rc = live_cfg();
    rc.mode = llm::Mode::Record;
    rc.cassette_path = path;
    Capture cap;
    cap.replies[llm::tmpl::kNaiveLlm] = "It is mentioned that Adnan Syed's DNA was not found on the hammer.";
    llm::Gateway rec(rc, cap.provider());
    auto first = query_naive_llm("Was Adnan's DNA on the hammer?", rec);
    rec.save();
    EXPECT_TRUE(first.context_refs.empty());
    EXPECT_FALSE(first.declined);

    llm::GatewayConfig pc;
    pc.cassette_path = path;
    llm::Gateway replay(pc);
    auto again = query_naive_llm("Was Adnan's DNA on the hammer?", replay);
    EXPECT_EQ(again, first);
    EXPECT_THROW(query_naive_llm("another question", replay), CacheMissError);
}
