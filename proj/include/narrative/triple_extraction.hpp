#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "narrative/ingest.hpp"
#include "narrative/kg_model.hpp"

namespace narrative::extraction {

/// Word classes driving the pattern extractor. Shipped as data so they can be
/// tuned without touching code.
struct ExtractionLexicon {
    std::set<std::string> determiners;
    std::set<std::string> pronouns;
    std::set<std::string> auxiliaries;
    std::set<std::string> do_support;
    std::set<std::string> negators;
    std::set<std::string> particles;
    std::set<std::string> prepositions;
    std::set<std::string> clause_breaks;
    std::set<std::string> discourse;
    std::set<std::string> verbs;
    std::set<std::string> non_verbs;
    std::set<std::string> abbreviations;

    static ExtractionLexicon defaults();
    static ExtractionLexicon load(const std::filesystem::path& path);
};

/// Pluggable boundary so a heavier extractor can replace the baseline.
class TripleExtractor {
public:
    virtual ~TripleExtractor() = default;
    /// Weight-1 triples with raw (uncanonicalised) endpoint text.
    virtual std::vector<kg::Triple> extract(std::string_view sentence) const = 0;
};

/// Finite-verb clause patterns: clauses split on coordinators and
/// subordinators, subject = noun phrase before the verb group, predicate =
/// auxiliaries + verb + particles (+ one preposition), object = noun phrase
/// after it. Pronouns are kept as arguments. Negated clauses get a
/// "negated:" relation prefix.
class PatternExtractor final : public TripleExtractor {
public:
    explicit PatternExtractor(ExtractionLexicon lexicon = ExtractionLexicon::defaults());
    std::vector<kg::Triple> extract(std::string_view sentence) const override;

    const ExtractionLexicon& lexicon() const { return lexicon_; }

private:
    ExtractionLexicon lexicon_;
};

/// Splits on ., ! and ? (outside known abbreviations) and on newlines.
std::vector<std::string> split_sentences(std::string_view text,
                                         const ExtractionLexicon& lexicon = ExtractionLexicon::defaults());

/// Uses a default PatternExtractor.
std::vector<kg::Triple> extract_triples(std::string_view sentence);

/// Weight of every triple is its occurrence count across the corpus; evidence
/// lists the chunk ids it came from. A sentence that throws is logged and skipped.
kg::KnowledgeGraph build_traditional_kg(const std::vector<ingest::Chunk>& chunks,
                                        const TripleExtractor& extractor);
kg::KnowledgeGraph build_traditional_kg(const std::vector<ingest::Chunk>& chunks);

}  // namespace narrative::extraction
