#pragma once

#include <memory>
#include <string>
#include <vector>

#include "narrative/llm_gateway.hpp"

namespace narrative::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one command line (without the program name). Returns the exit
/// status: 0 ok, 1 pipeline error, 2 usage error. `provider` replaces the
/// HTTP client in live and record mode; fixture generation scripts it.
int run(const std::vector<std::string>& args, std::shared_ptr<llm::Provider> provider = nullptr);

}  // namespace narrative::cli
