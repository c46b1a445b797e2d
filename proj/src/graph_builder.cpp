#include "narrative/graph_builder.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "narrative/community.hpp"
#include "narrative/error.hpp"
#include "narrative/graph_io.hpp"
#include "narrative/parallel.hpp"
#include "narrative/text.hpp"

namespace narrative::builder {

using nlohmann::json;

// ---- JSON -----------------------------------------------------------------

void to_json(json& j, const ExtractionRecord& r) {
    json ents = json::array(), rels = json::array();
    for (const auto& e : r.entities) ents.push_back({{"name", e.name}, {"kind", e.kind}, {"description", e.description}});
    for (const auto& x : r.relations)
        rels.push_back(
            {{"head", x.head}, {"tail", x.tail}, {"description", x.description}, {"strength", x.strength}});
    j = json{{"chunk_id", r.chunk_id}, {"gleaning_round", r.gleaning_round}, {"entities", ents}, {"relations", rels}};
}

void from_json(const json& j, ExtractionRecord& r) {
    r.chunk_id = j.at("chunk_id").get<std::string>();
    r.gleaning_round = j.value("gleaning_round", 0);
    r.entities.clear();
    r.relations.clear();
    for (const auto& e : j.value("entities", json::array()))
        r.entities.push_back({e.at("name"), e.value("kind", ""), e.value("description", "")});
    for (const auto& x : j.value("relations", json::array()))
        r.relations.push_back({x.at("head"), x.at("tail"), x.value("description", ""), x.value("strength", 1.0)});
}

void to_json(json& j, const CommunityReport& r) {
    j = json{{"community_id", r.community_id}, {"level", r.level},     {"members", r.members},
             {"title", r.title},               {"summary", r.summary}, {"findings", r.key_findings}};
}

void from_json(const json& j, CommunityReport& r) {
    r.community_id = j.at("community_id").get<int>();
    r.level = j.at("level").get<int>();
    r.members = j.at("members").get<std::vector<std::string>>();
    r.title = j.value("title", "");
    r.summary = j.value("summary", "");
    r.key_findings = j.value("findings", std::vector<std::string>{});
}

// ---- Parsing --------------------------------------------------------------

namespace {

std::string strip_quotes(std::string s) {
    s = text::trim(s);
    while (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
        s = text::trim(s.substr(1, s.size() - 2));
    }
    if (!s.empty() && (s.front() == '"' || s.front() == '\'')) s.erase(0, 1);
    if (!s.empty() && (s.back() == '"' || s.back() == '\'')) s.pop_back();
    return text::trim(s);
}

std::vector<std::string> split_on(std::string_view s, std::string_view delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (auto p = s.find(delim); p != std::string_view::npos; p = s.find(delim, start)) {
        out.emplace_back(s.substr(start, p - start));
        start = p + delim.size();
    }
    out.emplace_back(s.substr(start));
    return out;
}

}  // namespace

ParsedExtraction parse_extraction(std::string_view response) {
    ParsedExtraction out;
    std::string body(response);
    constexpr std::string_view kComplete = "<|COMPLETE|>";
    for (auto p = body.find(kComplete); p != std::string::npos; p = body.find(kComplete)) {
        out.complete = true;
        body.replace(p, kComplete.size(), "\n");
    }
    std::vector<std::string> pieces;
    for (auto& rec : split_on(body, "##"))
        for (auto& line : text::split(rec, '\n')) pieces.push_back(line);

    for (const auto& piece : pieces) {
        auto open = piece.find('(');
        auto close = piece.rfind(')');
        if (open == std::string::npos || close == std::string::npos || close <= open) continue;
        auto fields = split_on(std::string_view(piece).substr(open + 1, close - open - 1), "<|>");
        if (fields.size() < 2) continue;
        auto type = text::to_lower(strip_quotes(fields[0]));
        if (type == "entity") {
            ExtractedEntity e;
            e.name = strip_quotes(fields[1]);
            if (fields.size() > 2) e.kind = text::to_lower(strip_quotes(fields[2]));
            if (fields.size() > 3) e.description = strip_quotes(fields[3]);
            if (!kg::canonicalize(e.name).empty()) out.entities.push_back(std::move(e));
        } else if (type == "relationship" && fields.size() >= 3) {
            ExtractedRelation r;
            r.head = strip_quotes(fields[1]);
            r.tail = strip_quotes(fields[2]);
            if (fields.size() > 3) r.description = strip_quotes(fields[3]);
            if (fields.size() > 4) {
                try {
                    r.strength = std::stod(strip_quotes(fields[4]));
                } catch (const std::exception&) {
                    r.strength = 1.0;
                }
            }
            if (!kg::canonicalize(r.head).empty() && !kg::canonicalize(r.tail).empty())
                out.relations.push_back(std::move(r));
        }
    }
    return out;
}

// ---- Extraction -----------------------------------------------------------

namespace {

ParsedExtraction parse_or_reparse(const std::string& response, const ingest::Chunk& chunk, llm::Gateway& gw) {
    auto parsed = parse_extraction(response);
    if (parsed.parseable()) return parsed;
    spdlog::warn("chunk {}: extraction output unparseable, asking for a stricter rewrite", chunk.id);
    auto retry = gw.complete(llm::tmpl::kExtractReparse, {{"previous", response}, {"text", chunk.text}});
    parsed = parse_extraction(retry);
    if (!parsed.parseable())
        throw StructuredOutputError(fmt::format("chunk {}: extraction output could not be parsed", chunk.id), retry);
    return parsed;
}

}  // namespace

std::vector<ExtractionRecord> extract_with_gleaning(const ingest::Chunk& chunk, int max_gleanings,
                                                    llm::Gateway& gateway,
                                                    const std::vector<std::string>& entity_types) {
    if (max_gleanings < 0) throw ValidationError("max_gleanings must be >= 0");
    const auto types = text::join(entity_types, ", ");
    std::vector<ExtractionRecord> records;
    std::set<std::string> known_entities;
    std::set<std::pair<std::string, std::string>> known_pairs;

    // Returns whether the round contributed anything unseen.
    auto absorb = [&](const ParsedExtraction& p, int round) {
        bool fresh = false;
        for (const auto& e : p.entities) fresh |= known_entities.insert(kg::canonicalize(e.name)).second;
        for (const auto& r : p.relations) {
            fresh |= known_pairs.emplace(kg::canonicalize(r.head), kg::canonicalize(r.tail)).second;
            known_entities.insert(kg::canonicalize(r.head));
            known_entities.insert(kg::canonicalize(r.tail));
        }
        records.push_back({chunk.id, p.entities, p.relations, round});
        return fresh;
    };

    std::string history = gateway.complete(llm::tmpl::kExtract, {{"entity_types", types}, {"text", chunk.text}});
    absorb(parse_or_reparse(history, chunk, gateway), 0);
    for (int round = 1; round <= max_gleanings; ++round) {
        auto resp = gateway.complete(llm::tmpl::kGlean,
                                     {{"entity_types", types}, {"previous", history}, {"text", chunk.text}});
        bool fresh = absorb(parse_or_reparse(resp, chunk, gateway), round);
        history += "\n" + resp;
        if (!fresh) break;
    }
    return records;
}

std::vector<ExtractionRecord> extract_all(const std::vector<ingest::Chunk>& chunks, const BuildConfig& cfg,
                                          llm::Gateway& gateway) {
    std::vector<std::vector<ExtractionRecord>> per_chunk(chunks.size());
    parallel_for(chunks.size(), gateway.config().max_in_flight, [&](std::size_t i) {
        per_chunk[i] = extract_with_gleaning(chunks[i], cfg.max_gleanings, gateway, cfg.entity_types);
    });
    std::vector<ExtractionRecord> out;
    for (auto& v : per_chunk)
        for (auto& r : v) out.push_back(std::move(r));
    return out;
}

// ---- Assembly -------------------------------------------------------------

kg::KnowledgeGraph assemble_graph(const std::vector<ExtractionRecord>& records, int min_mentions) {
    struct EntityAcc {
        std::string display;
        std::map<std::string, int> kinds;
        std::set<std::string> descriptions;
        int mentions = 0;
    };
    struct RelationAcc {
        std::set<std::string> descriptions;
        int count = 0;
        std::set<std::string> evidence;
    };
    std::map<std::string, EntityAcc> entities;
    std::map<std::pair<std::string, std::string>, RelationAcc> relations;

    auto touch = [&](const std::string& name) -> EntityAcc& {
        auto id = kg::canonicalize(name);
        auto display = text::collapse_spaces(text::trim(name));
        auto& acc = entities[id];
        if (acc.display.empty() || display < acc.display) acc.display = display;
        return acc;
    };

    for (const auto& rec : records) {
        for (const auto& e : rec.entities) {
            auto& acc = touch(e.name);
            ++acc.mentions;
            if (auto k = text::to_lower(text::trim(e.kind)); !k.empty()) ++acc.kinds[k];
            if (!text::trim(e.description).empty()) acc.descriptions.insert(text::trim(e.description));
        }
        for (const auto& r : rec.relations) {
            touch(r.head);
            touch(r.tail);
            auto& acc = relations[{kg::canonicalize(r.head), kg::canonicalize(r.tail)}];
            ++acc.count;
            if (!text::trim(r.description).empty()) acc.descriptions.insert(text::trim(r.description));
            acc.evidence.insert(rec.chunk_id);
        }
    }

    std::set<std::string> related;
    for (const auto& [pair, _] : relations) {
        related.insert(pair.first);
        related.insert(pair.second);
    }

    kg::KnowledgeGraph g;
    for (const auto& [pair, acc] : relations) {
        std::vector<std::string> descs(acc.descriptions.begin(), acc.descriptions.end());
        kg::Triple t;
        t.head = pair.first;
        t.tail = pair.second;
        t.relation = descs.empty() ? "related to" : text::join(descs, "\n");
        t.weight = acc.count;
        t.evidence.assign(acc.evidence.begin(), acc.evidence.end());
        g.upsert_triple(t);
    }
    for (const auto& [id, acc] : entities) {
        if (!related.count(id) && acc.mentions < min_mentions) continue;
        kg::Entity e;
        e.id = id;
        e.display_name = acc.display;
        if (!acc.kinds.empty()) {
            auto best = std::max_element(acc.kinds.begin(), acc.kinds.end(), [](const auto& a, const auto& b) {
                return a.second < b.second || (a.second == b.second && a.first > b.first);
            });
            e.kind = best->first;
        }
        if (!acc.descriptions.empty())
            e.description = text::join(std::vector<std::string>(acc.descriptions.begin(), acc.descriptions.end()), "\n");
        g.put_entity(std::move(e));
    }
    return g;
}

// ---- Reports --------------------------------------------------------------

CommunityReport parse_community_report(std::string_view response) {
    auto open = response.find('{');
    auto close = response.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        throw StructuredOutputError("community report is not a JSON object", std::string(response));
    json j;
    try {
        j = json::parse(response.substr(open, close - open + 1));
    } catch (const json::exception& e) {
        throw StructuredOutputError(std::string("community report JSON is malformed: ") + e.what(),
                                    std::string(response));
    }
    if (!j.is_object() || !j.contains("summary") || !j["summary"].is_string())
        throw StructuredOutputError("community report lacks a summary", std::string(response));
    CommunityReport r;
    r.title = j.value("title", "");
    r.summary = j["summary"].get<std::string>();
    if (j.contains("findings") && j["findings"].is_array()) {
        for (const auto& f : j["findings"]) {
            if (f.is_string()) {
                r.key_findings.push_back(f.get<std::string>());
            } else if (f.is_object()) {
                std::vector<std::string> parts;
                for (const char* key : {"summary", "explanation"})
                    if (f.contains(key) && f[key].is_string()) parts.push_back(f[key].get<std::string>());
                if (!parts.empty()) r.key_findings.push_back(text::join(parts, ": "));
            }
        }
    }
    return r;
}

namespace {

std::string bullet_list(const std::vector<std::string>& items) {
    std::vector<std::string> lines;
    for (const auto& i : items) lines.push_back("- " + i);
    return text::join(lines, "\n");
}

// Single descriptions are used as-is; only merged ones go through the model.
std::string summarize(const std::vector<std::string>& descs, const std::string& template_id,
                      llm::Variables vars, llm::Gateway& gw) {
    if (descs.empty()) return "";
    if (descs.size() == 1) return descs.front();
    vars["descriptions"] = bullet_list(descs);
    return text::trim(gw.complete(template_id, vars));
}

}  // namespace

Reports generate_reports(const kg::KnowledgeGraph& graph, const kg::Hierarchy& hierarchy, llm::Gateway& gateway,
                         const BuildConfig& cfg) {
    auto check = check_refinement(hierarchy, graph.entity_ids());
    if (!check.ok) throw ValidationError("hierarchy does not fit the graph: " + check.reason);
    const int workers = gateway.config().max_in_flight;
    Reports out;

    std::vector<const kg::Entity*> ents;
    for (const auto& [_, e] : graph.entities()) ents.push_back(&e);
    std::vector<std::string> ent_summary(ents.size());
    parallel_for(ents.size(), workers, [&](std::size_t i) {
        const auto& e = *ents[i];
        auto descs = e.description ? text::split(*e.description, '\n') : std::vector<std::string>{};
        ent_summary[i] = with_context("entity " + e.id, [&] {
            return summarize(descs, llm::tmpl::kEntitySummary, {{"name", e.display_name}}, gateway);
        });
    });
    for (std::size_t i = 0; i < ents.size(); ++i) out.entity_summaries[ents[i]->id] = ent_summary[i];

    std::vector<const kg::Triple*> trs;
    for (const auto& [_, t] : graph.triples()) trs.push_back(&t);
    std::vector<std::string> rel_summary(trs.size());
    parallel_for(trs.size(), workers, [&](std::size_t i) {
        const auto& t = *trs[i];
        rel_summary[i] = with_context("relation " + t.head + " -> " + t.tail, [&] {
            return summarize(text::split(t.relation, '\n'), llm::tmpl::kRelationSummary,
                             {{"head", graph.find_entity(t.head)->display_name},
                              {"tail", graph.find_entity(t.tail)->display_name}},
                             gateway);
        });
    });
    for (std::size_t i = 0; i < trs.size(); ++i)
        out.relation_summaries[{trs[i]->head, trs[i]->relation, trs[i]->tail}] = rel_summary[i];

    // Enumerate blocks from the coarsest level down.
    kg::Hierarchy h = hierarchy;
    h.normalize();
    for (int level = static_cast<int>(h.depth()); level >= 1; --level)
        for (const auto& block : h.levels[level - 1]) {
            CommunityReport r;
            r.community_id = static_cast<int>(out.communities.size());
            r.level = level;
            r.members = block;
            out.communities.push_back(std::move(r));
        }

    auto degrees = graph.weighted_degrees();
    parallel_for(out.communities.size(), workers, [&](std::size_t i) {
        auto& r = out.communities[i];
        std::set<std::string> members(r.members.begin(), r.members.end());
        std::vector<std::string> order = r.members;
        std::stable_sort(order.begin(), order.end(),
                         [&](const auto& a, const auto& b) { return degrees[a] > degrees[b]; });
        int budget = cfg.report_context_words;
        std::vector<std::string> ent_lines, rel_lines;
        for (const auto& id : order) {
            auto line = graph.find_entity(id)->display_name;
            if (!out.entity_summaries[id].empty()) line += ": " + out.entity_summaries[id];
            int words = static_cast<int>(text::word_count(line));
            if (words > budget && !ent_lines.empty()) break;
            budget -= words;
            ent_lines.push_back(line);
        }
        std::vector<const kg::Triple*> inside;
        for (const auto* t : trs)
            if (members.count(t->head) && members.count(t->tail)) inside.push_back(t);
        std::stable_sort(inside.begin(), inside.end(),
                         [](const auto* a, const auto* b) { return a->weight > b->weight; });
        for (const auto* t : inside) {
            auto line = fmt::format("{} -> {}: {}", graph.find_entity(t->head)->display_name,
                                    graph.find_entity(t->tail)->display_name,
                                    out.relation_summaries[{t->head, t->relation, t->tail}]);
            int words = static_cast<int>(text::word_count(line));
            if (words > budget) break;
            budget -= words;
            rel_lines.push_back(line);
        }
        auto parsed = with_context(fmt::format("community {} (level {})", r.community_id, r.level), [&] {
            auto resp = gateway.complete(llm::tmpl::kCommunityReport,
                                         {{"community_id", std::to_string(r.community_id)},
                                          {"level", std::to_string(r.level)},
                                          {"entities", bullet_list(ent_lines)},
                                          {"relations", rel_lines.empty() ? "(none)" : bullet_list(rel_lines)}});
            return parse_community_report(resp);
        });
        r.title = parsed.title;
        r.summary = parsed.summary;
        r.key_findings = parsed.key_findings;
    });
    return out;
}

// ---- Orchestration & persistence -----------------------------------------

GraphRagBuild build_graphrag(const std::vector<ingest::Chunk>& chunks, const BuildConfig& cfg,
                             llm::Gateway& gateway) {
    if (chunks.empty()) throw ValidationError("no chunks to build from");
    GraphRagBuild b;
    b.seed = cfg.seed;
    b.records = extract_all(chunks, cfg, gateway);
    b.graph = assemble_graph(b.records, cfg.min_mentions);
    if (b.graph.empty()) throw ValidationError("extraction produced no entities");
    auto h = community::cluster_hierarchy(b.graph, cfg.max_levels, cfg.resolution_schedule, cfg.seed);
    b.graph.set_hierarchy(h);
    b.reports = generate_reports(b.graph, *b.graph.hierarchy(), gateway, cfg);
    spdlog::info("graphrag build: {} entities, {} relations, {} communities", b.graph.entities().size(),
                 b.graph.triples().size(), b.reports.communities.size());
    return b;
}

namespace {

template <class T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& r : rows) out << json(r).dump() << '\n';
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("missing build artifact " + path.string());
    std::vector<json> out;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(fmt::format("{}:{}: {}", path.string(), n, e.what()));
        }
    }
    return out;
}

}  // namespace

void save_build(const GraphRagBuild& b, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    kg::export_graph_file(b.graph, kg::GraphFormat::GraphML, dir / "graph.graphml");
    write_jsonl(dir / "extraction.jsonl", b.records);
    std::vector<json> ents, rels;
    for (const auto& [id, s] : b.reports.entity_summaries) ents.push_back({{"id", id}, {"summary", s}});
    for (const auto& [key, s] : b.reports.relation_summaries)
        rels.push_back({{"head", std::get<0>(key)}, {"relation", std::get<1>(key)}, {"tail", std::get<2>(key)},
                        {"summary", s}});
    write_jsonl(dir / "entity_summaries.jsonl", ents);
    write_jsonl(dir / "relation_summaries.jsonl", rels);
    write_jsonl(dir / "reports.jsonl", b.reports.communities);
    std::ofstream meta(dir / "build.json", std::ios::binary | std::ios::trunc);
    meta << json{{"seed", b.seed},
                 {"entities", b.graph.entities().size()},
                 {"relations", b.graph.triples().size()},
                 {"levels", b.graph.hierarchy() ? b.graph.hierarchy()->depth() : 0},
                 {"communities", b.reports.communities.size()}}
                .dump(2)
         << '\n';
}

GraphRagBuild load_build(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "graph.graphml"))
        throw NotFoundError("no graphrag build at " + dir.string() + " (run `build graphrag` first)");
    GraphRagBuild b;
    b.graph = kg::import_graph_file(kg::GraphFormat::GraphML, dir / "graph.graphml");
    for (const auto& j : read_jsonl(dir / "extraction.jsonl")) b.records.push_back(j.get<ExtractionRecord>());
    for (const auto& j : read_jsonl(dir / "entity_summaries.jsonl"))
        b.reports.entity_summaries[j.at("id")] = j.at("summary");
    for (const auto& j : read_jsonl(dir / "relation_summaries.jsonl"))
        b.reports.relation_summaries[{j.at("head"), j.at("relation"), j.at("tail")}] = j.at("summary");
    for (const auto& j : read_jsonl(dir / "reports.jsonl")) b.reports.communities.push_back(j.get<CommunityReport>());
    if (std::filesystem::exists(dir / "build.json")) {
        std::ifstream in(dir / "build.json");
        b.seed = json::parse(in).value("seed", 0ULL);
    }
    return b;
}

}  // namespace narrative::builder
