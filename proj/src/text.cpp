#include "snipcrs/text.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>

#include <fmt/format.h>

namespace snipcrs::text {

namespace {

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

char lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string rtrim(std::string_view s) {
  std::size_t e = s.size();
  while (e > 0 && is_space(s[e - 1])) --e;
  return std::string(s.substr(0, e));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), lower);
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string normalize_statement(std::string_view s) {
  std::string out = to_lower(collapse_whitespace(s));
  while (!out.empty() && (out.back() == '.' || out.back() == '!')) out.pop_back();
  return trim(out);
}

std::string first_line(std::string_view s) {
  std::string t = trim(s);
  auto nl = t.find('\n');
  if (nl != std::string::npos) t = trim(std::string_view(t).substr(0, nl));
  return t;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

bool contains_icase(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  auto it = std::search(haystack.begin(), haystack.end(), needle.begin(),
                        needle.end(),
                        [](char a, char b) { return lower(a) == lower(b); });
  return it != haystack.end();
}

std::size_t replace_all_icase(std::string& s, std::string_view needle,
                              std::string_view replacement) {
  if (needle.empty()) return 0;
  std::string folded = to_lower(s);
  std::string folded_needle = to_lower(needle);
  std::string out;
  out.reserve(s.size());
  std::size_t count = 0;
  std::size_t pos = 0;
  while (true) {
    auto hit = folded.find(folded_needle, pos);
    if (hit == std::string::npos) break;
    out.append(s, pos, hit - pos);
    out.append(replacement);
    pos = hit + needle.size();
    ++count;
  }
  out.append(s, pos, std::string::npos);
  s = std::move(out);
  return count;
}

std::string replace_all(std::string s, std::string_view needle,
                        std::string_view replacement) {
  if (needle.empty()) return s;
  std::size_t pos = 0;
  while ((pos = s.find(needle, pos)) != std::string::npos) {
    s.replace(pos, needle.size(), replacement);
    pos += replacement.size();
  }
  return s;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr);
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace snipcrs::text
