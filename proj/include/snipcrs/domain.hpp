#pragma once

#include <string>
#include <string_view>

namespace snipcrs {

enum class Domain { restaurant, book, clothing };

// Throws ConfigError for anything other than "restaurant", "book", "clothing".
Domain parse_domain(std::string_view tag);
std::string to_string(Domain d);

// "restaurant", "book", "clothing item".
std::string item_noun(Domain d);

// Placeholder substituted for item names: "this restaurant", "this book", ...
std::string anonymous_reference(Domain d);

}  // namespace snipcrs
