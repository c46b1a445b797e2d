#include "narrative/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/opensslv.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "narrative/analytics.hpp"
#include "narrative/config.hpp"
#include "narrative/error.hpp"
#include "narrative/evaluation.hpp"
#include "narrative/graph_builder.hpp"
#include "narrative/graph_io.hpp"
#include "narrative/ingest.hpp"
#include "narrative/retrieval.hpp"
#include "narrative/triple_extraction.hpp"

namespace narrative::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Globals {
    std::string config_path;
    bool replay = false, record = false, live = false;
    std::optional<std::uint64_t> seed;
    std::string run_dir = "run";
    std::string cassette;
    std::optional<int> workers;
    bool verbose = false;
};

// Artifact layout inside the run directory.
const fs::path kPreprocessed = "preprocessed.csv";
const fs::path kChunks = "chunks.jsonl";
const fs::path kTraditional = "traditional";
const fs::path kGraphRag = "graphrag";

void require(const fs::path& p, const std::string& producer) {
    if (!fs::exists(p))
        throw NotFoundError("missing artifact " + p.generic_string() + " (run `narrative " + producer + "` first)");
}

void write_file(const fs::path& p, const std::function<void(std::ostream&)>& fill) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    fill(out);
    if (!out) throw Error("write failed: " + p.string());
}

template <class T>
void write_jsonl(const fs::path& p, const std::vector<T>& items) {
    write_file(p, [&](std::ostream& out) {
        for (const auto& it : items) out << json(it).dump() << '\n';
    });
}

/// Resolved settings plus the outputs a step produced, for the manifest.
class Session {
public:
    Session(const Globals& g, std::shared_ptr<llm::Provider> provider) : provider_(std::move(provider)) {
        cfg_ = g.config_path.empty() ? Config::defaults() : Config::load(g.config_path);
        if (g.seed) cfg_.seed = cfg_.build.seed = *g.seed;
        if (g.workers) cfg_.workers = *g.workers;
        run_ = g.run_dir;
        if (!g.cassette.empty())
            cfg_.cassette = g.cassette;
        else if (cfg_.cassette.empty())
            cfg_.cassette = run_ / "cassette.jsonl";
        mode_ = g.live ? llm::Mode::Live : g.record ? llm::Mode::Record : llm::Mode::Replay;
    }

    Config& cfg() { return cfg_; }
    fs::path path(const fs::path& rel) const { return run_ / rel; }
    llm::Mode mode() const { return mode_; }

    llm::Gateway& gateway() {
        if (!gateway_) {
            if (mode_ == llm::Mode::Replay && !fs::exists(cfg_.cassette))
                throw NotFoundError("missing cassette " + cfg_.cassette.generic_string() +
                                    " (replay needs one; pass --cassette or run with --record)");
            gateway_ = std::make_unique<llm::Gateway>(cfg_.gateway(mode_), provider_);
        }
        return *gateway_;
    }

    std::vector<ingest::Chunk> chunks() const {
        require(path(kChunks), "ingest");
        return ingest::read_chunks(path(kChunks));
    }

    builder::GraphRagBuild graphrag() const {
        require(path(kGraphRag / "graph.graphml"), "build graphrag");
        return builder::load_build(path(kGraphRag));
    }

    void output(const fs::path& p) { outputs_.push_back(fs::relative(p, run_).generic_string()); }

    /// Saves a recorded cassette, then merges this step into the manifest.
    void finish(const std::string& step) {
        if (gateway_) {
            gateway_->save();
            auto s = gateway_->stats();
            spdlog::info("{}: {} model calls, {} cassette hits", step, s.provider_calls, s.replay_hits);
        }
        fs::create_directories(run_);
        const auto mpath = path("manifest.json");
        json m = json::object();
        if (fs::exists(mpath)) {
            std::ifstream in(mpath);
            m = json::parse(in, nullptr, false);
            if (m.is_discarded() || !m.is_object()) m = json::object();
        }
        m["tool"] = "narrative";
        m["version"] = kVersion;
        m["libraries"] = {{"boost", BOOST_LIB_VERSION},
                          {"cli11", CLI11_VERSION},
                          {"fmt", FMT_VERSION},
                          {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR,
                                                        NLOHMANN_JSON_VERSION_MINOR, NLOHMANN_JSON_VERSION_PATCH)},
                          {"openssl", OPENSSL_VERSION_TEXT},
                          {"spdlog", fmt::format("{}.{}.{}", SPDLOG_VER_MAJOR, SPDLOG_VER_MINOR, SPDLOG_VER_PATCH)}};
        m["seed"] = cfg_.seed;
        m["config_hash"] = cfg_.hash();
        m["config"] = cfg_;
        std::sort(outputs_.begin(), outputs_.end());
        m["steps"][step] = {{"mode", llm::mode_name(mode_)},
                            {"seed", cfg_.seed},
                            {"config_hash", cfg_.hash()},
                            {"outputs", outputs_}};
        write_file(mpath, [&](std::ostream& out) { out << m.dump(2) << '\n'; });
    }

private:
    Config cfg_;
    fs::path run_;
    llm::Mode mode_;
    std::shared_ptr<llm::Provider> provider_;
    std::unique_ptr<llm::Gateway> gateway_;
    std::vector<std::string> outputs_;
};

// ---- Steps -------------------------------------------------------------------

struct IngestArgs {
    std::string input;
    std::optional<int> chunk_size;
};

void do_ingest(Session& s, const IngestArgs& a) {
    auto& cfg = s.cfg();
    if (a.chunk_size) cfg.chunk_size = *a.chunk_size;
    cfg.validate();
    auto raw = ingest::parse_transcript(fs::path(a.input), cfg.columns);
    std::vector<ingest::TranscriptSegment> cleaned;
    cleaned.reserve(raw.size());
    for (const auto& seg : raw) cleaned.push_back(ingest::preprocess_segment(seg, cfg.preprocess));
    auto labeled = ingest::label_and_filter(cleaned, cfg.preprocess);
    auto chunks = ingest::chunk_segments(labeled, cfg.chunk_size);
    write_file(s.path(kPreprocessed), [&](std::ostream& o) { ingest::write_labeled_csv(o, labeled); });
    write_file(s.path(kChunks), [&](std::ostream& o) { ingest::write_chunks(o, chunks); });
    s.output(s.path(kPreprocessed));
    s.output(s.path(kChunks));
    std::cout << fmt::format("ingested {} rows: {} segments kept, {} chunks\n", raw.size(), labeled.size(),
                             chunks.size());
}

void print_stats(const kg::KnowledgeGraph& g) {
    auto st = kg::graph_stats(g, 5);
    std::cout << fmt::format("{} entities, {} triples\n", st.node_count, st.edge_count);
    for (const auto& [id, deg] : st.top_by_degree) std::cout << fmt::format("  {} ({})\n", id, deg);
}

void do_build_traditional(Session& s) {
    auto chunks = s.chunks();
    const auto& cfg = s.cfg();
    auto lex = cfg.extraction_lexicon.empty() ? extraction::ExtractionLexicon::defaults()
                                              : extraction::ExtractionLexicon::load(cfg.extraction_lexicon);
    auto g = extraction::build_traditional_kg(chunks, extraction::PatternExtractor(std::move(lex)));
    fs::create_directories(s.path(kTraditional));
    auto out = s.path(kTraditional / "graph.graphml");
    kg::export_graph_file(g, kg::GraphFormat::GraphML, out);
    auto csv = s.path(kTraditional / "triples.csv");
    kg::export_graph_file(g, kg::GraphFormat::TriplesCsv, csv);
    s.output(out);
    s.output(csv);
    print_stats(g);
}

void do_build_graphrag(Session& s, std::optional<int> gleanings) {
    auto chunks = s.chunks();
    auto& cfg = s.cfg();
    if (gleanings) cfg.build.max_gleanings = *gleanings;
    cfg.validate();
    auto b = builder::build_graphrag(chunks, cfg.build, s.gateway());
    builder::save_build(b, s.path(kGraphRag));
    for (const auto& e : fs::directory_iterator(s.path(kGraphRag))) s.output(e.path());
    print_stats(b.graph);
    std::cout << fmt::format("{} community reports\n", b.reports.communities.size());
}

struct QueryArgs {
    std::string mode = "local";
    std::string question;
    std::string questions_file;
    std::optional<int> level, k, budget;
    std::string out;
};

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw NotFoundError("questions file not found: " + p.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

void do_query(Session& s, const QueryArgs& a) {
    auto mode = retrieval::parse_query_mode(a.mode);
    auto& cfg = s.cfg();
    if (a.k) cfg.local.k = *a.k;
    if (a.level) cfg.global.level = *a.level;
    if (a.budget) cfg.local.budget = cfg.global.budget = *a.budget;
    cfg.validate();
    std::vector<std::string> questions;
    if (!a.question.empty()) questions.push_back(a.question);
    if (!a.questions_file.empty())
        for (auto& q : read_lines(a.questions_file)) questions.push_back(std::move(q));
    if (questions.empty()) throw ValidationError("no question given (positional argument or --questions)");

    std::vector<retrieval::Answer> answers;
    auto& gw = s.gateway();
    if (mode == retrieval::QueryMode::NaiveLlm) {
        for (const auto& q : questions) answers.push_back(retrieval::query_naive_llm(q, gw));
    } else if (mode == retrieval::QueryMode::NaiveRag) {
        auto chunks = s.chunks();
        std::vector<std::string> ids, texts;
        for (const auto& c : chunks) {
            ids.push_back(c.id);
            texts.push_back(c.text);
        }
        retrieval::EmbeddingIndex index(ids, texts, gw);
        for (const auto& q : questions)
            answers.push_back(retrieval::query_naive_rag(q, chunks, index, cfg.local.k, gw));
    } else {
        auto chunks = s.chunks();
        auto b = s.graphrag();
        retrieval::Retriever r(b, chunks, gw);
        for (const auto& q : questions) answers.push_back(r.query(mode, q, cfg.local, cfg.global));
    }
    for (const auto& ans : answers) std::cout << json(ans).dump() << '\n';
    if (!a.out.empty()) write_jsonl(a.out, answers);
}

struct SentimentArgs {
    std::optional<int> window;
    std::optional<double> penalty;
    std::optional<int> episode;
};

void do_sentiment(Session& s, const SentimentArgs& a) {
    auto& cfg = s.cfg();
    if (a.window) cfg.window = *a.window;
    if (a.penalty) cfg.penalty = *a.penalty;
    cfg.validate();
    require(s.path(kPreprocessed), "ingest");
    auto labeled = ingest::read_labeled_csv(s.path(kPreprocessed));
    auto lexicon = analytics::SentimentLexicon::load(cfg.lexicon);

    std::map<int, std::vector<ingest::LabeledSegment>> episodes;
    for (auto& seg : labeled)
        if (!a.episode || seg.label.episode == *a.episode) episodes[seg.label.episode].push_back(std::move(seg));
    if (episodes.empty()) throw ValidationError("no segments to score");

    json summary = json::object();
    for (const auto& [ep, segs] : episodes) {
        auto series = analytics::score_segments(segs, lexicon);
        auto raw = series.raw();
        int window = cfg.window;
        if (window > static_cast<int>(raw.size())) {
            spdlog::warn("episode {}: window {} exceeds {} segments; using {}", ep, window, raw.size(), raw.size());
            window = static_cast<int>(raw.size());
        }
        series.smoothed = analytics::rolling_average(raw, window);
        double beta = cfg.penalty ? *cfg.penalty : analytics::default_penalty(series.smoothed);
        auto cps = analytics::pelt_changepoints(series.smoothed, beta);

        auto csv = s.path(fmt::format("sentiment/episode_{}.csv", ep));
        auto svg = s.path(fmt::format("sentiment/episode_{}.svg", ep));
        write_file(csv, [&](std::ostream& o) { analytics::write_sentiment_csv(o, series, cps); });
        write_file(svg, [&](std::ostream& o) { analytics::write_sentiment_svg(o, series, cps); });
        s.output(csv);
        s.output(svg);

        std::vector<std::string> labels;
        for (auto i : cps.indices) labels.push_back(series.points[i].label.render());
        summary[std::to_string(ep)] = {{"segments", raw.size()}, {"penalty", beta}, {"changepoints", labels}};
        std::cout << fmt::format("episode {}: {} segments, penalty {:.4f}, change-points [{}]\n", ep, raw.size(),
                                 beta, fmt::join(labels, ", "));
    }
    auto sp = s.path("sentiment/changepoints.json");
    write_file(sp, [&](std::ostream& o) { o << summary.dump(2) << '\n'; });
    s.output(sp);
}

void do_hearsay(Session& s, std::optional<int> limit) {
    auto chunks = s.chunks();
    if (limit && *limit >= 0 && static_cast<std::size_t>(*limit) < chunks.size()) chunks.resize(*limit);
    auto records = analytics::analyze_hearsay(chunks, s.gateway());
    auto tab = analytics::crosstab_hearsay_sentiment(records);
    auto rp = s.path("hearsay/records.jsonl");
    auto cp = s.path("hearsay/crosstab.csv");
    write_jsonl(rp, records);
    write_file(cp, [&](std::ostream& o) { analytics::write_crosstab_csv(o, tab); });
    s.output(rp);
    s.output(cp);
    std::cout << fmt::format("hearsay in {} of {} chunks ({:.1f}%)\n", tab.totals[0], records.size(),
                             100.0 * analytics::hearsay_rate(records));
    std::cout << analytics::render_crosstab(tab);
}

void do_keywords(Session& s, const std::vector<int>& ids, std::optional<int> level) {
    auto b = s.graphrag();
    std::vector<const builder::CommunityReport*> picked;
    for (const auto& r : b.reports.communities) {
        bool want = ids.empty() || std::find(ids.begin(), ids.end(), r.community_id) != ids.end();
        if (level && r.level != *level) want = false;
        if (want) picked.push_back(&r);
    }
    for (int id : ids)
        if (std::none_of(picked.begin(), picked.end(), [&](auto* r) { return r->community_id == id; }))
            throw NotFoundError(fmt::format("no community report with id {}", id));
    std::vector<analytics::KeywordReport> out;
    for (const auto* r : picked) out.push_back(analytics::extract_keywords(*r, s.gateway()));
    auto kp = s.path("keywords/keywords.jsonl");
    write_jsonl(kp, out);
    s.output(kp);
    for (const auto& k : out) {
        std::cout << fmt::format("community {}: {}\n", k.community_id, fmt::join(k.keywords, ", "));
        if (!k.uniqueness_note.empty()) std::cout << "  " << k.uniqueness_note << '\n';
    }
}

std::vector<retrieval::QueryMode> parse_modes(const std::vector<std::string>& names) {
    if (names.empty()) return {eval::kAllModes.begin(), eval::kAllModes.end()};
    std::vector<retrieval::QueryMode> out;
    for (const auto& n : names) out.push_back(retrieval::parse_query_mode(n));
    return out;
}

void do_eval_corpus(Session& s, const std::string& questions, const std::vector<std::string>& modes) {
    auto corpus = eval::QuestionCorpus::load(questions);
    auto chunks = s.chunks();
    auto b = s.graphrag();
    auto& cfg = s.cfg();
    auto& gw = s.gateway();
    retrieval::Retriever r(b, chunks, gw);
    eval::Answerer answer = [&](retrieval::QueryMode m, const std::string& q) {
        return r.query(m, q, cfg.local, cfg.global);
    };
    auto ms = parse_modes(modes);
    auto cells = eval::run_corpus(corpus, ms, answer, cfg.workers);
    auto run = eval::judge_corpus(corpus, cells, {eval::kMetrics.begin(), eval::kMetrics.end()}, gw, cfg.seed,
                                  cfg.workers);
    auto table = eval::tally(run.verdicts, ms);

    auto ap = s.path("eval/answers.jsonl"), vp = s.path("eval/verdicts.jsonl"), tp = s.path("eval/win_table.csv");
    write_jsonl(ap, cells);
    write_jsonl(vp, run.verdicts);
    write_file(tp, [&](std::ostream& o) { eval::write_win_table_csv(o, table); });
    for (const auto& p : {ap, vp, tp}) s.output(p);
    if (!run.excluded.empty()) {
        auto xp = s.path("eval/excluded.csv");
        write_file(xp, [&](std::ostream& o) {
            o << "question_id,reason\n";
            for (const auto& [q, why] : run.excluded) o << q << ',' << '"' << why << '"' << '\n';
        });
        s.output(xp);
        spdlog::warn("{} question/metric pairs excluded; see eval/excluded.csv", run.excluded.size());
    }
    std::cout << eval::render_win_table(table);
}

void do_eval_adversarial(Session& s, const std::string& cases_path, const std::string& grades,
                         const std::vector<std::string>& modes) {
    auto cases = eval::load_adversarial_cases(cases_path);
    auto chunks = s.chunks();
    auto b = s.graphrag();
    auto& cfg = s.cfg();
    retrieval::Retriever r(b, chunks, s.gateway());
    eval::Answerer answer = [&](retrieval::QueryMode m, const std::string& q) {
        return r.query(m, q, cfg.local, cfg.global);
    };
    auto cells = eval::run_adversarial(cases, parse_modes(modes), answer, cfg.workers);
    if (!grades.empty()) eval::apply_grades(cells, eval::load_grades(grades));
    auto cp = s.path("eval/adversarial.jsonl"), gp = s.path("eval/grading_sheet.csv");
    write_jsonl(cp, cells);
    write_file(gp, [&](std::ostream& o) { eval::write_grading_sheet(o, cells); });
    s.output(cp);
    s.output(gp);
    std::cout << eval::render_adversarial(eval::summarize(cells));
}

void do_export(Session& s, const std::string& format, const std::string& source, std::string out) {
    auto fmt_ = kg::parse_graph_format(format);
    fs::path src;
    if (source == "traditional") {
        src = s.path(kTraditional / "graph.graphml");
        require(src, "build traditional");
    } else {
        src = s.path(kGraphRag / "graph.graphml");
        require(src, "build graphrag");
    }
    auto g = kg::import_graph_file(kg::GraphFormat::GraphML, src);
    static const std::map<kg::GraphFormat, std::string> ext = {
        {kg::GraphFormat::GraphML, "graphml"}, {kg::GraphFormat::Dot, "dot"}, {kg::GraphFormat::TriplesCsv, "csv"}};
    fs::path dest = out.empty() ? s.path(fs::path("export") / (source + "." + ext.at(fmt_))) : fs::path(out);
    if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
    kg::export_graph_file(g, fmt_, dest);
    if (out.empty()) s.output(dest);
    std::cout << dest.generic_string() << '\n';
}

void setup_logging(bool verbose) {
    auto logger = std::make_shared<spdlog::logger>("narrative", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    logger->set_pattern("%l: %v");
    logger->set_level(verbose ? spdlog::level::info : spdlog::level::warn);
    spdlog::set_default_logger(logger);
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::shared_ptr<llm::Provider> provider) {
    CLI::App app{"Transcript narrative analysis: ingest, build, query, analyze, evaluate, export.", "narrative"};
    app.fallthrough();
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Globals g;
    app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
    auto* replay = app.add_flag("--replay", g.replay, "answer model calls from the cassette only (default)");
    auto* record = app.add_flag("--record", g.record, "call the provider and record into the cassette");
    auto* live = app.add_flag("--live", g.live, "call the provider without recording");
    replay->excludes(record)->excludes(live);
    record->excludes(live);
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--run-dir", g.run_dir, "directory holding all artifacts")->capture_default_str();
    app.add_option("--cassette", g.cassette, "cassette file (default <run-dir>/cassette.jsonl)");
    app.add_option("--workers", g.workers, "parallel model calls")->check(CLI::PositiveNumber);
    app.add_flag("-v,--verbose", g.verbose, "log progress to stderr");

    std::function<void(Session&)> action;
    std::string step;
    auto on = [&](CLI::App* sub, std::string name, std::function<void(Session&)> fn) {
        sub->callback([&action, &step, name = std::move(name), fn = std::move(fn)] {
            step = name;
            action = fn;
        });
    };

    IngestArgs ia;
    auto* ingest_cmd = app.add_subcommand("ingest", "preprocess a transcript CSV and chunk it");
    ingest_cmd->add_option("--input", ia.input, "transcript CSV")->required()->check(CLI::ExistingFile);
    ingest_cmd->add_option("--chunk-size", ia.chunk_size, "words per chunk");
    on(ingest_cmd, "ingest", [&](Session& s) { do_ingest(s, ia); });

    auto* build = app.add_subcommand("build", "build a knowledge graph")->require_subcommand(1);
    on(build->add_subcommand("traditional", "pattern-based triples"), "build traditional",
       [](Session& s) { do_build_traditional(s); });
    std::optional<int> gleanings;
    auto* gr = build->add_subcommand("graphrag", "model-extracted graph, communities and reports");
    gr->add_option("--max-gleanings", gleanings, "extra extraction rounds per chunk");
    on(gr, "build graphrag", [&](Session& s) { do_build_graphrag(s, gleanings); });

    QueryArgs qa;
    auto* query = app.add_subcommand("query", "answer questions");
    query->add_option("question", qa.question, "question text");
    query->add_option("--questions", qa.questions_file, "file with one question per line");
    query->add_option("--mode", qa.mode, "local|global|naive-rag|naive-llm")
        ->check(CLI::IsMember({"local", "global", "naive-rag", "naive-llm", "naive_rag", "naive_llm"}))
        ->capture_default_str();
    query->add_option("--level", qa.level, "hierarchy level for global search (0 = coarsest)");
    query->add_option("--k", qa.k, "entities (local) or chunks (naive-rag)");
    query->add_option("--budget", qa.budget, "context word budget");
    query->add_option("--out", qa.out, "also write answer records to this JSONL file");
    on(query, "query", [&](Session& s) { do_query(s, qa); });

    auto* analyze = app.add_subcommand("analyze", "sentiment, hearsay and keyword analysis")->require_subcommand(1);
    SentimentArgs sa;
    auto* sent = analyze->add_subcommand("sentiment", "lexicon sentiment, smoothing and change-points");
    sent->add_option("--window", sa.window, "rolling average window");
    sent->add_option("--penalty", sa.penalty, "change-point penalty");
    sent->add_option("--episode", sa.episode, "only this episode");
    on(sent, "analyze sentiment", [&](Session& s) { do_sentiment(s, sa); });
    std::optional<int> limit;
    auto* hs = analyze->add_subcommand("hearsay", "hearsay and five-class sentiment per chunk");
    hs->add_option("--limit", limit, "only the first N chunks");
    on(hs, "analyze hearsay", [&](Session& s) { do_hearsay(s, limit); });
    std::vector<int> communities;
    std::optional<int> kw_level;
    auto* kw = analyze->add_subcommand("keywords", "ten keywords per community report");
    kw->add_option("--community", communities, "community ids (default all)");
    kw->add_option("--level", kw_level, "only communities at this level");
    on(kw, "analyze keywords", [&](Session& s) { do_keywords(s, communities, kw_level); });

    auto* ev = app.add_subcommand("eval", "judge query modes against each other")->require_subcommand(1);
    std::string questions, cases, grades;
    std::vector<std::string> modes;
    auto* corpus = ev->add_subcommand("corpus", "answer a question corpus in every mode and judge");
    corpus->add_option("--questions", questions, "question corpus (JSON or JSONL)")->required();
    corpus->add_option("--modes", modes, "modes to compare");
    on(corpus, "eval corpus", [&](Session& s) { do_eval_corpus(s, questions, modes); });
    auto* adv = ev->add_subcommand("adversarial", "run trap prompts and collect grades");
    adv->add_option("--cases", cases, "adversarial cases (JSON)")->required();
    adv->add_option("--grades", grades, "graded CSV (case_id,mode,outcome)");
    adv->add_option("--modes", modes, "modes to run");
    on(adv, "eval adversarial", [&](Session& s) { do_eval_adversarial(s, cases, grades, modes); });

    auto* exp = app.add_subcommand("export", "write artifacts in interchange formats")->require_subcommand(1);
    std::string format, source = "traditional", out;
    auto* eg = exp->add_subcommand("graph", "export a knowledge graph");
    eg->add_option("--format", format, "graphml|dot|csv")->required()->check(CLI::IsMember({"graphml", "dot", "csv"}));
    eg->add_option("--source", source, "traditional|graphrag")
        ->check(CLI::IsMember({"traditional", "graphrag"}))
        ->capture_default_str();
    eg->add_option("--out", out, "output file (default <run-dir>/export/<source>.<ext>)");
    on(eg, "export graph", [&](Session& s) { do_export(s, format, source, out); });

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n' << app.help();
        return 2;
    }

    setup_logging(g.verbose);
    try {
        Session session(g, std::move(provider));
        action(session);
        session.finish(step);
    } catch (const std::exception& e) {
        std::cerr << "error: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}

}  // namespace narrative::cli
