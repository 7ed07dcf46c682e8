#include "snipcrs/domain.hpp"
#include "snipcrs/errors.hpp"
#include "snipcrs/snippet.hpp"

namespace snipcrs {

Domain parse_domain(std::string_view tag) {
  if (tag == "restaurant") return Domain::restaurant;
  if (tag == "book") return Domain::book;
  if (tag == "clothing") return Domain::clothing;
  throw ConfigError("unknown domain '" + std::string(tag) + "'");
}

std::string to_string(Domain d) {
  switch (d) {
    case Domain::restaurant: return "restaurant";
    case Domain::book: return "book";
    case Domain::clothing: return "clothing";
  }
  return "restaurant";
}

std::string item_noun(Domain d) {
  switch (d) {
    case Domain::restaurant: return "restaurant";
    case Domain::book: return "book";
    case Domain::clothing: return "clothing item";
  }
  return "item";
}

std::string anonymous_reference(Domain d) {
  switch (d) {
    case Domain::restaurant: return "this restaurant";
    case Domain::book: return "this book";
    case Domain::clothing: return "this item";
  }
  return "this item";
}

std::string to_string(SnippetOrigin o) {
  switch (o) {
    case SnippetOrigin::review: return "review";
    case SnippetOrigin::attribute: return "attribute";
    case SnippetOrigin::document: return "document";
    case SnippetOrigin::sentence: return "sentence";
  }
  return "review";
}

SnippetOrigin parse_origin(std::string_view tag) {
  if (tag == "review") return SnippetOrigin::review;
  if (tag == "attribute") return SnippetOrigin::attribute;
  if (tag == "document") return SnippetOrigin::document;
  if (tag == "sentence") return SnippetOrigin::sentence;
  throw ConfigError("unknown snippet origin '" + std::string(tag) + "'");
}

std::string to_string(Granularity g) {
  switch (g) {
    case Granularity::document: return "document";
    case Granularity::sentence: return "sentence";
    case Granularity::snippet: return "snippet";
  }
  return "snippet";
}

Granularity parse_granularity(std::string_view tag) {
  if (tag == "document") return Granularity::document;
  if (tag == "sentence") return Granularity::sentence;
  if (tag == "snippet") return Granularity::snippet;
  throw ConfigError("unknown granularity '" + std::string(tag) + "'");
}

bool origin_fits(SnippetOrigin origin, Granularity g) {
  switch (g) {
    case Granularity::document: return origin == SnippetOrigin::document;
    case Granularity::sentence: return origin == SnippetOrigin::sentence;
    case Granularity::snippet:
      return origin == SnippetOrigin::review ||
             origin == SnippetOrigin::attribute;
  }
  return false;
}

}  // namespace snipcrs
