#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "narrative/kg_model.hpp"

namespace narrative::kg {

enum class GraphFormat { GraphML, Dot, TriplesCsv };

/// Accepts "graphml", "dot", "csv" or "triples-csv"; anything else throws a
/// ValidationError listing the supported names.
GraphFormat parse_graph_format(std::string_view name);
std::string_view format_name(GraphFormat format);

// GraphML and DOT carry everything: entity kind/description, triple
// relation/weight/evidence, and hierarchy levels as node attributes
// level_1..level_h. The triples CSV (head,relation,tail,weight,evidence) holds
// the triple layer; entities without triples appear as rows with empty
// relation and tail.
void export_graph(const KnowledgeGraph& graph, GraphFormat format, std::ostream& out);
KnowledgeGraph import_graph(GraphFormat format, std::istream& in);

void export_graph_file(const KnowledgeGraph& graph, GraphFormat format, const std::filesystem::path& path);
KnowledgeGraph import_graph_file(GraphFormat format, const std::filesystem::path& path);

}  // namespace narrative::kg
