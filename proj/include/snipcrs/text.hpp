#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared across modules. ASCII-only case folding.
namespace snipcrs::text {

std::string trim(std::string_view s);
std::string rtrim(std::string_view s);
std::string to_lower(std::string_view s);

// Collapses whitespace runs to one space and trims both ends.
std::string collapse_whitespace(std::string_view s);

// Lowercased and whitespace-collapsed; used for exact "same statement" checks.
std::string normalize_statement(std::string_view s);

// First line of `s` after trimming; empty if `s` is blank.
std::string first_line(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

bool contains_icase(std::string_view haystack, std::string_view needle);

// Replaces every case-insensitive occurrence of `needle`. Returns the count.
std::size_t replace_all_icase(std::string& s, std::string_view needle,
                              std::string_view replacement);

std::string replace_all(std::string s, std::string_view needle,
                        std::string_view replacement);

std::string sha256_hex(std::string_view data);

std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace snipcrs::text
