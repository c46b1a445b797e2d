#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace narrative::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
/// Trims and replaces every internal whitespace run with a single space.
std::string collapse_spaces(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool iequals(std::string_view a, std::string_view b);
bool contains_ci(std::string_view haystack, std::string_view needle);
std::size_t word_count(std::string_view s);

/// Joins the first `max_words` whitespace tokens with single spaces.
std::string first_words(std::string_view s, std::size_t max_words);

}  // namespace narrative::text
