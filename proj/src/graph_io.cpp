#include "narrative/graph_io.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fmt/format.h>

#include "narrative/csv.hpp"
#include "narrative/error.hpp"
#include "narrative/text.hpp"

namespace narrative::kg {

GraphFormat parse_graph_format(std::string_view name) {
    auto n = text::to_lower(name);
    if (n == "graphml") return GraphFormat::GraphML;
    if (n == "dot") return GraphFormat::Dot;
    if (n == "csv" || n == "triples-csv") return GraphFormat::TriplesCsv;
    throw ValidationError(fmt::format("unsupported graph format '{}' (supported: graphml, dot, csv)", name));
}

std::string_view format_name(GraphFormat format) {
    switch (format) {
        case GraphFormat::GraphML: return "graphml";
        case GraphFormat::Dot: return "dot";
        case GraphFormat::TriplesCsv: return "csv";
    }
    return "?";
}

namespace {

std::string join_evidence(const std::vector<std::string>& ev) { return text::join(ev, ";"); }

std::vector<std::string> split_evidence(const std::string& s) {
    if (s.empty()) return {};
    return text::split(s, ';');
}

double parse_weight(const std::string& s) {
    std::size_t used = 0;
    double w = 0;
    try {
        w = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ParseError("bad weight '" + s + "'");
    }
    if (used != s.size()) throw ParseError("bad weight '" + s + "'");
    return w;
}

/// Block index per entity per level, in the hierarchy's normalised order.
std::vector<std::map<std::string, std::size_t>> level_index(const KnowledgeGraph& g) {
    std::vector<std::map<std::string, std::size_t>> out;
    if (!g.hierarchy()) return out;
    for (const auto& level : g.hierarchy()->levels) {
        std::map<std::string, std::size_t> idx;
        for (std::size_t b = 0; b < level.size(); ++b)
            for (const auto& m : level[b]) idx[m] = b;
        out.push_back(std::move(idx));
    }
    return out;
}

Hierarchy hierarchy_from_levels(const std::map<std::string, std::map<std::size_t, std::size_t>>& node_levels,
                                std::size_t depth) {
    Hierarchy h;
    for (std::size_t l = 1; l <= depth; ++l) {
        std::map<std::size_t, Block> blocks;
        for (const auto& [id, lv] : node_levels) {
            auto it = lv.find(l);
            if (it == lv.end()) throw ParseError(fmt::format("node '{}' lacks level_{}", id, l));
            blocks[it->second].push_back(id);
        }
        Partition p;
        for (auto& [_, b] : blocks) p.push_back(std::move(b));
        h.levels.push_back(std::move(p));
    }
    return h;
}

// --- GraphML ---------------------------------------------------------------

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            case '\r': out += "&#13;"; break;
            default: out += c;
        }
    }
    return out;
}

void write_graphml(const KnowledgeGraph& g, std::ostream& out) {
    auto levels = level_index(g);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
           "  <key id=\"name\" for=\"node\" attr.name=\"name\" attr.type=\"string\"/>\n"
           "  <key id=\"kind\" for=\"node\" attr.name=\"kind\" attr.type=\"string\"/>\n"
           "  <key id=\"description\" for=\"node\" attr.name=\"description\" attr.type=\"string\"/>\n";
    for (std::size_t l = 1; l <= levels.size(); ++l)
        out << fmt::format("  <key id=\"level_{0}\" for=\"node\" attr.name=\"level_{0}\" attr.type=\"int\"/>\n", l);
    out << "  <key id=\"relation\" for=\"edge\" attr.name=\"relation\" attr.type=\"string\"/>\n"
           "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n"
           "  <key id=\"evidence\" for=\"edge\" attr.name=\"evidence\" attr.type=\"string\"/>\n"
           "  <key id=\"levels\" for=\"graph\" attr.name=\"levels\" attr.type=\"int\"/>\n";
    out << "  <graph id=\"kg\" edgedefault=\"directed\">\n";
    if (g.hierarchy()) out << fmt::format("    <data key=\"levels\">{}</data>\n", levels.size());
    for (const auto& [id, e] : g.entities()) {
        out << "    <node id=\"" << xml_escape(id) << "\">\n";
        out << "      <data key=\"name\">" << xml_escape(e.display_name) << "</data>\n";
        if (e.kind) out << "      <data key=\"kind\">" << xml_escape(*e.kind) << "</data>\n";
        if (e.description) out << "      <data key=\"description\">" << xml_escape(*e.description) << "</data>\n";
        for (std::size_t l = 0; l < levels.size(); ++l)
            out << fmt::format("      <data key=\"level_{}\">{}</data>\n", l + 1, levels[l].at(id));
        out << "    </node>\n";
    }
    for (const auto& [_, t] : g.triples()) {
        out << "    <edge source=\"" << xml_escape(t.head) << "\" target=\"" << xml_escape(t.tail) << "\">\n";
        out << "      <data key=\"relation\">" << xml_escape(t.relation) << "</data>\n";
        out << fmt::format("      <data key=\"weight\">{}</data>\n", t.weight);
        out << "      <data key=\"evidence\">" << xml_escape(join_evidence(t.evidence)) << "</data>\n";
        out << "    </edge>\n";
    }
    out << "  </graph>\n</graphml>\n";
}

KnowledgeGraph read_graphml(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError(std::string("graphml: ") + e.what());
    }
    const auto& graph = tree.get_child("graphml.graph");
    KnowledgeGraph g;
    std::size_t depth = 0;
    bool has_hierarchy = false;
    std::map<std::string, std::map<std::size_t, std::size_t>> node_levels;
    std::vector<Triple> triples;

    for (const auto& [tag, child] : graph) {
        if (tag == "data" && child.get<std::string>("<xmlattr>.key") == "levels") {
            depth = static_cast<std::size_t>(std::stoul(child.data()));
            has_hierarchy = true;
        } else if (tag == "node") {
            Entity e;
            e.id = child.get<std::string>("<xmlattr>.id");
            auto& lv = node_levels[e.id];
            for (const auto& [dtag, d] : child) {
                if (dtag != "data") continue;
                auto key = d.get<std::string>("<xmlattr>.key");
                if (key == "name") e.display_name = d.data();
                else if (key == "kind") e.kind = d.data();
                else if (key == "description") e.description = d.data();
                else if (key.rfind("level_", 0) == 0)
                    lv[std::stoul(key.substr(6))] = static_cast<std::size_t>(std::stoul(d.data()));
            }
            g.put_entity(std::move(e));
        } else if (tag == "edge") {
            Triple t;
            t.head = child.get<std::string>("<xmlattr>.source");
            t.tail = child.get<std::string>("<xmlattr>.target");
            for (const auto& [dtag, d] : child) {
                if (dtag != "data") continue;
                auto key = d.get<std::string>("<xmlattr>.key");
                if (key == "relation") t.relation = d.data();
                else if (key == "weight") t.weight = parse_weight(d.data());
                else if (key == "evidence") t.evidence = split_evidence(d.data());
            }
            triples.push_back(std::move(t));
        }
    }
    for (const auto& t : triples) {
        if (!g.has_entity(t.head) || !g.has_entity(t.tail))
            throw ParseError(fmt::format("graphml edge references unknown node ({} -> {})", t.head, t.tail));
        g.upsert_triple(t);
    }
    if (has_hierarchy) g.set_hierarchy(hierarchy_from_levels(node_levels, depth));
    return g;
}

// --- DOT -------------------------------------------------------------------

std::string dot_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    out += '"';
    return out;
}

void write_dot(const KnowledgeGraph& g, std::ostream& out) {
    auto levels = level_index(g);
    out << "digraph kg {\n";
    if (g.hierarchy()) out << fmt::format("  graph [levels=\"{}\"];\n", levels.size());
    for (const auto& [id, e] : g.entities()) {
        out << "  " << dot_quote(id) << " [label=" << dot_quote(e.display_name);
        if (e.kind) out << ", kind=" << dot_quote(*e.kind);
        if (e.description) out << ", description=" << dot_quote(*e.description);
        for (std::size_t l = 0; l < levels.size(); ++l)
            out << fmt::format(", level_{}=\"{}\"", l + 1, levels[l].at(id));
        out << "];\n";
    }
    for (const auto& [_, t] : g.triples()) {
        out << "  " << dot_quote(t.head) << " -> " << dot_quote(t.tail) << " [label=" << dot_quote(t.relation)
            << ", weight=\"" << fmt::format("{}", t.weight) << "\", evidence=" << dot_quote(join_evidence(t.evidence))
            << "];\n";
    }
    out << "}\n";
}

/// Tokenizer for the DOT subset emitted above: IDs, quoted strings, and the
/// punctuation { } [ ] = ; , ->
class DotLexer {
public:
    explicit DotLexer(std::string src) : src_(std::move(src)) {}

    struct Token {
        enum Kind { Id, Punct, End } kind;
        std::string value;
    };

    Token next() {
        skip();
        if (pos_ >= src_.size()) return {Token::End, ""};
        char c = src_[pos_];
        if (c == '"') return {Token::Id, quoted()};
        if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
            pos_ += 2;
            return {Token::Punct, "->"};
        }
        if (std::string_view("{}[]=;,").find(c) != std::string_view::npos) {
            ++pos_;
            return {Token::Punct, std::string(1, c)};
        }
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' || src_[pos_] == '.'))
            ++pos_;
        if (start == pos_) throw ParseError(fmt::format("dot: unexpected character '{}'", c));
        return {Token::Id, src_.substr(start, pos_ - start)};
    }

private:
    void skip() {
        while (pos_ < src_.size()) {
            if (std::isspace(static_cast<unsigned char>(src_[pos_]))) {
                ++pos_;
            } else if (src_.compare(pos_, 2, "//") == 0) {
                while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::string quoted() {
        ++pos_;
        std::string out;
        while (pos_ < src_.size() && src_[pos_] != '"') {
            char c = src_[pos_++];
            if (c == '\\' && pos_ < src_.size()) {
                char n = src_[pos_++];
                switch (n) {
                    case 'n': out += '\n'; break;
                    case 'r': out += '\r'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: out += '\\'; out += n;
                }
            } else {
                out += c;
            }
        }
        if (pos_ >= src_.size()) throw ParseError("dot: unterminated string");
        ++pos_;
        return out;
    }

    std::string src_;
    std::size_t pos_ = 0;
};

KnowledgeGraph read_dot(std::istream& in) {
    std::stringstream buf;
    buf << in.rdbuf();
    DotLexer lex(buf.str());
    using Tok = DotLexer::Token;

    auto expect = [&](const char* p) {
        auto t = lex.next();
        if (t.kind != Tok::Punct || t.value != p) throw ParseError(fmt::format("dot: expected '{}'", p));
    };
    auto head = lex.next();
    if (head.kind != Tok::Id || head.value != "digraph") throw ParseError("dot: expected 'digraph'");
    auto name = lex.next();
    if (name.kind == Tok::Id) expect("{");
    else if (name.value != "{") throw ParseError("dot: expected '{'");

    auto read_attrs = [&]() {
        std::map<std::string, std::string> attrs;
        while (true) {
            auto k = lex.next();
            if (k.kind == Tok::Punct && k.value == "]") break;
            if (k.kind == Tok::Punct && k.value == ",") continue;
            if (k.kind != Tok::Id) throw ParseError("dot: expected attribute name");
            expect("=");
            auto v = lex.next();
            if (v.kind != Tok::Id) throw ParseError("dot: expected attribute value");
            attrs[k.value] = v.value;
        }
        return attrs;
    };

    KnowledgeGraph g;
    std::size_t depth = 0;
    bool has_hierarchy = false;
    std::map<std::string, std::map<std::size_t, std::size_t>> node_levels;
    std::vector<Triple> triples;

    auto tok = lex.next();
    while (!(tok.kind == Tok::Punct && tok.value == "}")) {
        if (tok.kind == Tok::End) throw ParseError("dot: unexpected end of input");
        if (tok.kind == Tok::Punct && tok.value == ";") {
            tok = lex.next();
            continue;
        }
        if (tok.kind != Tok::Id) throw ParseError("dot: expected statement");
        std::string first = tok.value;
        tok = lex.next();
        if (first == "graph" && tok.value == "[") {
            auto attrs = read_attrs();
            if (attrs.count("levels")) {
                depth = std::stoul(attrs["levels"]);
                has_hierarchy = true;
            }
            tok = lex.next();
        } else if (tok.kind == Tok::Punct && tok.value == "->") {
            auto target = lex.next();
            if (target.kind != Tok::Id) throw ParseError("dot: expected edge target");
            Triple t;
            t.head = first;
            t.tail = target.value;
            tok = lex.next();
            if (tok.value == "[") {
                auto attrs = read_attrs();
                t.relation = attrs["label"];
                t.weight = attrs.count("weight") ? parse_weight(attrs["weight"]) : 1.0;
                t.evidence = split_evidence(attrs["evidence"]);
                tok = lex.next();
            }
            triples.push_back(std::move(t));
        } else {
            Entity e;
            e.id = first;
            e.display_name = first;
            if (tok.value == "[") {
                auto attrs = read_attrs();
                auto& lv = node_levels[e.id];
                for (auto& [k, v] : attrs) {
                    if (k == "label") e.display_name = v;
                    else if (k == "kind") e.kind = v;
                    else if (k == "description") e.description = v;
                    else if (k.rfind("level_", 0) == 0) lv[std::stoul(k.substr(6))] = std::stoul(v);
                }
                tok = lex.next();
            }
            node_levels.try_emplace(e.id);
            g.put_entity(std::move(e));
        }
    }
    for (const auto& t : triples) {
        if (!g.has_entity(t.head) || !g.has_entity(t.tail))
            throw ParseError(fmt::format("dot edge references unknown node ({} -> {})", t.head, t.tail));
        g.upsert_triple(t);
    }
    if (has_hierarchy) g.set_hierarchy(hierarchy_from_levels(node_levels, depth));
    return g;
}

// --- Triples CSV -------------------------------------------------------------

void write_triples_csv(const KnowledgeGraph& g, std::ostream& out) {
    csv::write_row(out, {"head", "relation", "tail", "weight", "evidence"});
    std::set<std::string> touched;
    for (const auto& [_, t] : g.triples()) {
        touched.insert(t.head);
        touched.insert(t.tail);
        csv::write_row(out, {g.find_entity(t.head)->display_name, t.relation, g.find_entity(t.tail)->display_name,
                             fmt::format("{}", t.weight), join_evidence(t.evidence)});
    }
    for (const auto& [id, e] : g.entities())
        if (!touched.count(id)) csv::write_row(out, {e.display_name, "", "", "", ""});
}

KnowledgeGraph read_triples_csv(std::istream& in) {
    auto records = csv::read(in);
    if (records.empty()) throw ParseError("triples csv is empty");
    KnowledgeGraph g;
    for (std::size_t r = 1; r < records.size(); ++r) {
        auto f = records[r].fields;
        f.resize(5);
        if (f[1].empty() && f[2].empty()) {
            g.add_entity(f[0]);
            continue;
        }
        Triple t;
        t.head = f[0];
        t.relation = f[1];
        t.tail = f[2];
        t.weight = f[3].empty() ? 1.0 : parse_weight(f[3]);
        t.evidence = split_evidence(f[4]);
        try {
            g.upsert_triple(t);
        } catch (const ValidationError& e) {
            throw ParseError(fmt::format("triples csv row {}: {}", r, e.what()));
        }
    }
    return g;
}

}  // namespace

void export_graph(const KnowledgeGraph& graph, GraphFormat format, std::ostream& out) {
    switch (format) {
        case GraphFormat::GraphML: write_graphml(graph, out); break;
        case GraphFormat::Dot: write_dot(graph, out); break;
        case GraphFormat::TriplesCsv: write_triples_csv(graph, out); break;
    }
}

KnowledgeGraph import_graph(GraphFormat format, std::istream& in) {
    switch (format) {
        case GraphFormat::GraphML: return read_graphml(in);
        case GraphFormat::Dot: return read_dot(in);
        case GraphFormat::TriplesCsv: return read_triples_csv(in);
    }
    throw ValidationError("unsupported format");
}

void export_graph_file(const KnowledgeGraph& graph, GraphFormat format, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    export_graph(graph, format, out);
}

KnowledgeGraph import_graph_file(GraphFormat format, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("missing artifact " + path.string());
    return import_graph(format, in);
}

}  // namespace narrative::kg
