#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "narrative/graph_builder.hpp"
#include "narrative/ingest.hpp"
#include "narrative/llm_gateway.hpp"
#include "narrative/retrieval.hpp"

namespace narrative {

/// Everything a run can be tuned with. Loaded from one JSON file; command-line
/// flags are applied on top by the caller.
struct Config {
    int chunk_size = 600;
    int window = 10;
    std::optional<double> penalty;  // unset: default_penalty of the smoothed series
    builder::BuildConfig build;
    retrieval::LocalOptions local;
    retrieval::GlobalOptions global;
    int workers = 4;
    std::uint64_t seed = 42;

    std::string model = "gpt-4o-mini";
    std::string embedding_model = "text-embedding-3-small";
    std::string provider_url = "https://api.openai.com";
    std::string api_key_env = "OPENAI_API_KEY";
    std::filesystem::path cassette;  // empty: <run-dir>/cassette.jsonl

    std::filesystem::path lexicon;             // sentiment valences
    std::filesystem::path extraction_lexicon;  // empty: built-in word lists

    ingest::PreprocessConfig preprocess = ingest::PreprocessConfig::defaults();
    ingest::ColumnMapping columns;

    /// Relative paths inside the file resolve against the file's directory.
    /// Unknown keys are a ConfigError, so typos do not silently fall back.
    static Config load(const std::filesystem::path& path);
    static Config defaults();

    /// Range checks; throws ConfigError.
    void validate() const;

    /// SHA-256 of the canonical JSON form.
    std::string hash() const;

    llm::GatewayConfig gateway(llm::Mode mode) const;
};

void to_json(nlohmann::json& j, const Config& c);
/// Overlays the keys present in `j` onto `c`.
void apply_json(const nlohmann::json& j, Config& c, const std::filesystem::path& base = {});

/// Shipped data directory (lexicons, fixtures) of this source tree.
std::filesystem::path data_dir();

}  // namespace narrative
