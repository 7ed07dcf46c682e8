#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace snipcrs {

enum class SnippetOrigin { review, attribute, document, sentence };

// Representation granularity of an index.
enum class Granularity { document, sentence, snippet };

std::string to_string(SnippetOrigin o);
SnippetOrigin parse_origin(std::string_view tag);
std::string to_string(Granularity g);
Granularity parse_granularity(std::string_view tag);

// True if a unit of `origin` may live in an index of granularity `g`.
bool origin_fits(SnippetOrigin origin, Granularity g);

// One statement about one item. `source_review_id` is set for every unit cut
// from a single review (review, document and sentence origins).
struct Snippet {
  std::string snippet_id;
  std::string item_id;
  std::string text;
  SnippetOrigin origin = SnippetOrigin::review;
  std::optional<std::string> source_review_id;

  friend bool operator==(const Snippet&, const Snippet&) = default;
};

}  // namespace snipcrs
