#include "narrative/retrieval.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "narrative/error.hpp"
#include "narrative/parallel.hpp"
#include "narrative/templates.hpp"
#include "narrative/text.hpp"

namespace narrative::retrieval {

using json = nlohmann::json;

QueryMode parse_query_mode(std::string_view s) {
    auto v = text::to_lower(text::trim(s));
    std::replace(v.begin(), v.end(), '-', '_');
    if (v == "local") return QueryMode::Local;
    if (v == "global") return QueryMode::Global;
    if (v == "naive_rag" || v == "rag") return QueryMode::NaiveRag;
    if (v == "naive_llm" || v == "llm") return QueryMode::NaiveLlm;
    throw ValidationError("unknown query mode '" + std::string(s) + "' (local, global, naive_rag, naive_llm)");
}

std::string query_mode_name(QueryMode m) {
    switch (m) {
        case QueryMode::Local: return "local";
        case QueryMode::Global: return "global";
        case QueryMode::NaiveRag: return "naive_rag";
        case QueryMode::NaiveLlm: return "naive_llm";
    }
    return "?";
}

void to_json(json& j, const Answer& a) {
    j = json{{"question", a.question},
             {"mode", query_mode_name(a.mode)},
             {"text", a.text},
             {"context_refs",
              {{"entities", a.context_refs.entities},
               {"communities", a.context_refs.communities},
               {"chunks", a.context_refs.chunks}}},
             {"declined", a.declined}};
}

void from_json(const json& j, Answer& a) {
    a.question = j.at("question").get<std::string>();
    a.mode = parse_query_mode(j.at("mode").get<std::string>());
    a.text = j.at("text").get<std::string>();
    const auto& r = j.at("context_refs");
    a.context_refs.entities = r.value("entities", std::vector<std::string>{});
    a.context_refs.communities = r.value("communities", std::vector<int>{});
    a.context_refs.chunks = r.value("chunks", std::vector<std::string>{});
    a.declined = j.value("declined", false);
}

bool is_refusal(std::string_view reply) {
    static const char* const kMarkers[] = {
        "data provided does not specify",
        "unable to answer this question",
        "does not specify",
        "do not contain the answer",
        "does not contain the answer",
        "does not contain any information",
        "do not contain any information",
        "cannot be determined from the",
        "not enough information",
    };
    for (const char* m : kMarkers)
        if (text::contains_ci(reply, m)) return true;
    return false;
}

// ---- Embedding index -------------------------------------------------------

EmbeddingIndex::EmbeddingIndex(std::vector<std::string> ids, const std::vector<std::string>& texts,
                               llm::Gateway& gateway)
    : ids_(std::move(ids)), vectors_(ids_.size()) {
    if (texts.size() != ids_.size()) throw ValidationError("embedding index needs one text per id");
    parallel_for(ids_.size(), gateway.config().max_in_flight,
                 [&](std::size_t i) { vectors_[i] = with_context("embedding " + ids_[i], [&] { return gateway.embed(texts[i]); }); });
}

std::vector<EmbeddingIndex::Hit> EmbeddingIndex::top_k(const llm::Embedding& query, std::size_t k) const {
    std::vector<Hit> hits;
    hits.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) hits.push_back({i, llm::cosine(query, vectors_[i])});
    std::sort(hits.begin(), hits.end(), [&](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return ids_[a.index] < ids_[b.index];
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

namespace {

Answer make_answer(const std::string& question, QueryMode mode, std::string reply, ContextRefs refs) {
    Answer a;
    a.question = question;
    a.mode = mode;
    a.text = text::trim(reply);
    a.context_refs = std::move(refs);
    a.declined = is_refusal(a.text);
    return a;
}

std::string report_text(const builder::CommunityReport& r) {
    std::string s = "# " + r.title + "\n\n" + r.summary;
    for (const auto& f : r.key_findings) s += "\n- " + f;
    return s;
}

// One context line. Stays whole or is left out.
struct Item {
    enum Kind { Entity, Relation, Chunk, Report } kind;
    std::string ref;
    int community = -1;
    std::string line;
};

std::string one_line(std::string_view s) {
    std::string out = text::collapse_spaces(s);
    std::replace(out.begin(), out.end(), '|', '/');
    return out;
}

}  // namespace

// ---- Local -----------------------------------------------------------------

Retriever::Retriever(const builder::GraphRagBuild& build, const std::vector<ingest::Chunk>& chunks,
                     llm::Gateway& gateway)
    : build_(build), chunks_(chunks), gateway_(gateway) {
    std::vector<std::string> ids, texts;
    for (const auto& [id, e] : build.graph.entities()) {
        ids.push_back(id);
        auto it = build.reports.entity_summaries.find(id);
        std::string summary = it != build.reports.entity_summaries.end() ? it->second : e.description.value_or("");
        texts.push_back(e.display_name + ". " + summary);
    }
    entity_index_ = EmbeddingIndex(std::move(ids), texts, gateway);
    ids.clear();
    texts.clear();
    for (const auto& c : chunks) {
        ids.push_back(c.id);
        texts.push_back(c.text);
    }
    chunk_index_ = EmbeddingIndex(std::move(ids), texts, gateway);
}

Answer Retriever::query_local(const std::string& question, const LocalOptions& opts) const {
    if (opts.k <= 0) throw ValidationError("k must be positive");
    if (opts.budget <= 0) throw ValidationError("budget must be positive");
    const auto& g = build_.graph;
    if (g.empty()) throw ValidationError("local search needs a nonempty graph");

    auto q = gateway_.embed(question);
    std::vector<std::string> selected;
    for (const auto& h : entity_index_.top_k(q, static_cast<std::size_t>(opts.k)))
        selected.push_back(entity_index_.ids()[h.index]);
    std::set<std::string> selected_set(selected.begin(), selected.end());

    // 1-hop neighbours, strongest connection first.
    std::map<std::string, double> neighbour_weight;
    std::vector<const kg::Triple*> attached;
    std::set<kg::KnowledgeGraph::TripleKey> seen_triples;
    for (const auto& id : selected)
        for (const auto* t : g.incident(id)) {
            if (seen_triples.insert({t->head, t->relation, t->tail}).second) attached.push_back(t);
            for (const auto& other : {t->head, t->tail})
                if (!selected_set.count(other)) neighbour_weight[other] += t->weight;
        }
    std::vector<std::pair<std::string, double>> neighbours(neighbour_weight.begin(), neighbour_weight.end());
    std::stable_sort(neighbours.begin(), neighbours.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::stable_sort(attached.begin(), attached.end(),
                     [](const kg::Triple* a, const kg::Triple* b) { return a->weight > b->weight; });

    std::vector<Item> items;
    auto entity_item = [&](const std::string& id) {
        const auto* e = g.find_entity(id);
        auto it = build_.reports.entity_summaries.find(id);
        std::string desc = it != build_.reports.entity_summaries.end() ? it->second : e->description.value_or("");
        items.push_back({Item::Entity, id, -1, fmt::format("{}|{}|{}", id, one_line(e->display_name), one_line(desc))});
    };
    for (const auto& id : selected) entity_item(id);
    for (const auto& [id, _] : neighbours) entity_item(id);

    for (const auto* t : attached) {
        auto it = build_.reports.relation_summaries.find({t->head, t->relation, t->tail});
        std::string desc = it != build_.reports.relation_summaries.end() ? it->second : t->relation;
        items.push_back({Item::Relation, "", -1,
                         fmt::format("{}|{}|{}|{}", g.find_entity(t->head)->display_name,
                                     g.find_entity(t->tail)->display_name, one_line(desc), t->weight)});
    }

    // Source chunks: where the selected entities were mentioned or the
    // attached relations were evidenced, best match first.
    std::set<std::string> candidates;
    for (const auto& r : build_.records)
        for (const auto& e : r.entities)
            if (selected_set.count(kg::canonicalize(e.name))) candidates.insert(r.chunk_id);
    for (const auto* t : attached) candidates.insert(t->evidence.begin(), t->evidence.end());
    int taken = 0;
    for (const auto& h : chunk_index_.top_k(q, chunk_index_.size())) {
        if (taken >= opts.max_chunks) break;
        const auto& id = chunk_index_.ids()[h.index];
        if (!candidates.count(id)) continue;
        items.push_back({Item::Chunk, id, -1, fmt::format("{}|{}", id, one_line(chunks_[h.index].text))});
        ++taken;
    }

    // Covering community reports, finest level first.
    std::vector<const builder::CommunityReport*> covering;
    for (const auto& r : build_.reports.communities)
        for (const auto& m : r.members)
            if (selected_set.count(m)) {
                covering.push_back(&r);
                break;
            }
    std::stable_sort(covering.begin(), covering.end(),
                     [](const auto* a, const auto* b) { return a->level < b->level; });
    for (const auto* r : covering)
        items.push_back({Item::Report, "", r->community_id,
                         fmt::format("{}|{}|{}", r->community_id, one_line(r->title), one_line(report_text(*r)))});

    // Fill the budget in priority order; the first item that does not fit
    // ends the context so lower-priority material never displaces it.
    ContextRefs refs;
    std::map<Item::Kind, std::vector<std::string>> sections;
    std::size_t used = 0;
    std::size_t kept = 0;
    for (const auto& it : items) {
        auto words = text::word_count(it.line);
        if (used + words > static_cast<std::size_t>(opts.budget)) break;
        used += words;
        ++kept;
        sections[it.kind].push_back(it.line);
        if (it.kind == Item::Entity) refs.entities.push_back(it.ref);
        if (it.kind == Item::Chunk) refs.chunks.push_back(it.ref);
        if (it.kind == Item::Report) refs.communities.push_back(it.community);
    }
    if (kept < items.size())
        spdlog::warn("local context truncated at {} of {} items ({} word budget)", kept, items.size(), opts.budget);

    static const std::pair<Item::Kind, const char*> kHeaders[] = {
        {Item::Entity, "-----Entities-----\nid|entity|description"},
        {Item::Relation, "-----Relationships-----\nsource|target|description|weight"},
        {Item::Chunk, "-----Sources-----\nid|text"},
        {Item::Report, "-----Reports-----\nid|title|content"},
    };
    std::string context;
    for (const auto& [kind, header] : kHeaders) {
        auto s = sections.find(kind);
        if (s == sections.end()) continue;
        if (!context.empty()) context += "\n\n";
        context += header;
        for (const auto& line : s->second) context += "\n" + line;
    }

    auto reply = gateway_.complete(llm::tmpl::kLocalAnswer, {{"context", context}, {"question", question}});
    return make_answer(question, QueryMode::Local, reply, std::move(refs));
}

// ---- Global ----------------------------------------------------------------

std::vector<MapPoint> parse_map_points(std::string_view response, int community_id) {
    auto open = response.find('{');
    auto close = response.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return {};
    json j = json::parse(response.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("points") || !j["points"].is_array()) return {};
    std::vector<MapPoint> out;
    for (const auto& p : j["points"]) {
        if (!p.is_object() || !p.contains("description") || !p["description"].is_string()) continue;
        MapPoint m;
        m.community_id = community_id;
        m.description = text::trim(p["description"].get<std::string>());
        const auto& s = p.value("score", json(0));
        if (s.is_number()) m.score = static_cast<int>(s.get<double>());
        else if (s.is_string()) m.score = std::atoi(s.get<std::string>().c_str());
        m.score = std::clamp(m.score, 0, 100);
        if (!m.description.empty()) out.push_back(std::move(m));
    }
    return out;
}

std::vector<MapPoint> select_points(std::vector<MapPoint> points, int budget) {
    std::erase_if(points, [](const MapPoint& p) { return p.score <= 0; });
    std::stable_sort(points.begin(), points.end(), [](const MapPoint& a, const MapPoint& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.community_id < b.community_id;
    });
    std::vector<MapPoint> out;
    std::size_t used = 0;
    for (auto& p : points) {
        auto words = text::word_count(p.description);
        if (used + words > static_cast<std::size_t>(budget)) break;
        used += words;
        out.push_back(std::move(p));
    }
    return out;
}

Answer query_global(const std::string& question, const std::vector<builder::CommunityReport>& reports,
                    const GlobalOptions& opts, llm::Gateway& gateway) {
    if (opts.budget <= 0) throw ValidationError("budget must be positive");
    if (opts.level < 0) throw ValidationError("level must be >= 0");
    int level = opts.level;
    if (level == 0)
        for (const auto& r : reports) level = std::max(level, r.level);
    std::vector<const builder::CommunityReport*> at_level;
    for (const auto& r : reports)
        if (r.level == level) at_level.push_back(&r);
    if (at_level.empty()) throw ValidationError(fmt::format("no community reports at level {}", level));

    std::vector<std::vector<MapPoint>> mapped(at_level.size());
    parallel_for(at_level.size(), gateway.config().max_in_flight, [&](std::size_t i) {
        const auto& r = *at_level[i];
        auto reply = with_context(fmt::format("global map, community {}", r.community_id), [&] {
            return gateway.complete(llm::tmpl::kGlobalMap, {{"report", report_text(r)}, {"question", question}});
        });
        mapped[i] = parse_map_points(reply, r.community_id);
    });
    std::vector<MapPoint> all;
    for (auto& v : mapped)
        for (auto& p : v) all.push_back(std::move(p));
    auto chosen = select_points(std::move(all), opts.budget);

    if (chosen.empty()) {
        Answer a;
        a.question = question;
        a.mode = QueryMode::Global;
        a.text = kGlobalNoData;
        a.declined = true;
        return a;
    }

    std::string points;
    std::set<int> communities;
    for (const auto& p : chosen) {
        if (!points.empty()) points += "\n\n";
        points += fmt::format("----Analyst {}----\nImportance Score: {}\n{}", p.community_id, p.score, p.description);
        communities.insert(p.community_id);
    }
    auto reply = gateway.complete(llm::tmpl::kGlobalReduce, {{"points", points}, {"question", question}});
    ContextRefs refs;
    refs.communities.assign(communities.begin(), communities.end());
    return make_answer(question, QueryMode::Global, reply, std::move(refs));
}

Answer Retriever::query_global(const std::string& question, const GlobalOptions& opts) const {
    return retrieval::query_global(question, build_.reports.communities, opts, gateway_);
}

// ---- Naive -----------------------------------------------------------------

Answer query_naive_rag(const std::string& question, const std::vector<ingest::Chunk>& chunks,
                       const EmbeddingIndex& index, int k, llm::Gateway& gateway) {
    if (k <= 0) throw ValidationError("k must be positive");
    if (chunks.empty()) throw ValidationError("naive RAG needs at least one chunk");
    if (index.size() != chunks.size()) throw ValidationError("chunk index does not match the chunks");
    if (static_cast<std::size_t>(k) > chunks.size()) {
        spdlog::warn("k = {} exceeds the {} available chunks; using {}", k, chunks.size(), chunks.size());
        k = static_cast<int>(chunks.size());
    }
    ContextRefs refs;
    std::string context;
    for (const auto& h : index.top_k(gateway.embed(question), static_cast<std::size_t>(k))) {
        const auto& c = chunks[h.index];
        if (!context.empty()) context += "\n\n";
        context += "[" + c.id + "]\n" + c.text;
        refs.chunks.push_back(c.id);
    }
    auto reply = gateway.complete(llm::tmpl::kNaiveRag, {{"context", context}, {"question", question}});
    return make_answer(question, QueryMode::NaiveRag, reply, std::move(refs));
}

Answer query_naive_llm(const std::string& question, llm::Gateway& gateway) {
    auto reply = gateway.complete(llm::tmpl::kNaiveLlm, {{"question", question}});
    return make_answer(question, QueryMode::NaiveLlm, reply, {});
}

Answer Retriever::query_naive_rag(const std::string& question, int k) const {
    return retrieval::query_naive_rag(question, chunks_, chunk_index_, k, gateway_);
}

Answer Retriever::query_naive_llm(const std::string& question) const {
    return retrieval::query_naive_llm(question, gateway_);
}

Answer Retriever::query(QueryMode mode, const std::string& question, const LocalOptions& local,
                        const GlobalOptions& global) const {
    switch (mode) {
        case QueryMode::Local: return query_local(question, local);
        case QueryMode::Global: return query_global(question, global);
        case QueryMode::NaiveRag: return query_naive_rag(question, local.k);
        case QueryMode::NaiveLlm: return query_naive_llm(question);
    }
    throw ValidationError("unknown query mode");
}

}  // namespace narrative::retrieval
