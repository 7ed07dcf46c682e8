#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "snipcrs/corpus.hpp"
#include "snipcrs/domain.hpp"
#include "snipcrs/gateway.hpp"
#include "snipcrs/snippet.hpp"

namespace snipcrs {

// Pulls quoted strings out of a model's list answer. Accepts a bracketed
// list, one quoted string per line, missing or trailing commas, code fences,
// and either quote style. Blank output and "[]" give an empty list; prose
// with no quoted strings throws ParseError.
std::vector<std::string> parse_string_list(std::string_view raw);

// Snippets of one review, ids "{review_id}#s{n}" from 1.
std::vector<Snippet> decompose_review(const Review& review, Domain domain,
                                      Gateway& gateway);

struct ReviewFailure {
  std::string review_id;
  std::string message;
};

struct SnippetBuild {
  std::vector<Snippet> snippets;
  std::vector<ReviewFailure> failures;
  std::size_t reviews = 0;
  std::size_t duplicates_dropped = 0;
};

struct SnippetBuildOptions {
  std::size_t parallelism = 1;
  double max_failure_rate = 0.2;
};

// Review snippets then attribute snippets for each item, in corpus order,
// with exact repeats within an item dropped. Per-review failures are
// collected; throws Error when more than max_failure_rate of reviews fail.
SnippetBuild build_item_snippets(const Corpus& corpus, Domain domain, Gateway& gateway,
                                 const SnippetBuildOptions& options = {});

// Undecomposed units for the baselines.
//  document: "{review_id}#d" per review plus "{item_id}#d-attr" holding the
//            item's attribute statements as one synthetic review.
//  sentence: "{review_id}#t{n}" per sentence plus the attribute statements.
std::vector<Snippet> build_baseline_units(const Corpus& corpus, Granularity granularity);

}  // namespace snipcrs
