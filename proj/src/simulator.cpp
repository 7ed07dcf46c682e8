#include "snipcrs/simulator.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>

#include "snipcrs/dialogue.hpp"
#include "snipcrs/errors.hpp"
#include "snipcrs/prompts.hpp"
#include "snipcrs/text.hpp"

namespace snipcrs {

using nlohmann::json;

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool matches_at(std::string_view text, std::size_t pos, std::string_view alias) {
  if (alias.empty() || pos + alias.size() > text.size()) return false;
  for (std::size_t i = 0; i < alias.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) !=
        std::tolower(static_cast<unsigned char>(alias[i])))
      return false;
  }
  // Word boundaries only matter where the alias itself starts or ends with
  // a word character.
  if (is_word_char(alias.front()) && pos > 0 && is_word_char(text[pos - 1])) return false;
  std::size_t end = pos + alias.size();
  if (is_word_char(alias.back()) && end < text.size() && is_word_char(text[end])) return false;
  return true;
}

bool capitalized(const std::string& token) {
  return !token.empty() && (std::isupper(static_cast<unsigned char>(token.front())) ||
                            std::isdigit(static_cast<unsigned char>(token.front())));
}

std::string join(const std::vector<std::string>& tokens, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) out += (i > from ? " " : "") + tokens[i];
  return out;
}

std::vector<const Review*> top_by_votes(std::vector<const Review*> reviews, std::size_t n) {
  std::sort(reviews.begin(), reviews.end(), [](const Review* a, const Review* b) {
    if (a->helpful_votes != b->helpful_votes) return a->helpful_votes > b->helpful_votes;
    return a->review_id < b->review_id;
  });
  if (reviews.size() > n) reviews.resize(n);
  return reviews;
}

std::string strip_role_prefix(std::string line) {
  for (std::string_view prefix : {"Seeker:", "seeker:", "SEEKER:"}) {
    if (line.rfind(prefix, 0) == 0) return text::trim(std::string_view(line).substr(prefix.size()));
  }
  return line;
}

}  // namespace

std::vector<std::string> item_aliases(const Item& item) {
  std::vector<std::string> aliases;
  const std::string name = text::collapse_whitespace(item.name);
  if (name.empty()) return aliases;
  aliases.push_back(name);
  auto tokens = text::split(name, ' ');
  if (tokens.size() >= 3 && text::to_lower(tokens.front()) == "the")
    aliases.push_back(join(tokens, 1, tokens.size()));
  for (std::size_t from = 0; from < tokens.size(); ++from) {
    for (std::size_t to = from + 2; to <= tokens.size(); ++to) {
      if (!capitalized(tokens[to - 1])) break;
      if (!capitalized(tokens[from])) break;
      if (from == 0 && to == tokens.size()) continue;
      if (text::to_lower(tokens[from]) == "the" && to - from == 2) continue;
      aliases.push_back(join(tokens, from, to));
    }
  }
  std::set<std::string> seen;
  std::vector<std::string> unique;
  for (auto& a : aliases)
    if (seen.insert(text::to_lower(a)).second) unique.push_back(std::move(a));
  std::stable_sort(unique.begin(), unique.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return unique;
}

bool mentions_any(std::string_view text, const std::vector<std::string>& aliases) {
  for (std::size_t pos = 0; pos < text.size(); ++pos)
    for (const auto& a : aliases)
      if (matches_at(text, pos, a)) return true;
  return false;
}

std::pair<std::string, AnonymizationMap> anonymize(std::string_view text, const Item& item,
                                                   Domain domain) {
  const auto aliases = item_aliases(item);
  const std::string placeholder = anonymous_reference(domain);
  std::string out;
  out.reserve(text.size());
  std::set<std::string> used;
  for (std::size_t pos = 0; pos < text.size();) {
    const std::string* hit = nullptr;
    for (const auto& a : aliases) {
      if (matches_at(text, pos, a)) {
        hit = &a;
        break;
      }
    }
    if (hit) {
      out += placeholder;
      used.insert(*hit);
      pos += hit->size();
    } else {
      out += text[pos++];
    }
  }
  AnonymizationMap map;
  for (const auto& a : aliases)
    if (used.count(a)) map.emplace_back(a, placeholder);
  return {std::move(out), std::move(map)};
}

ReviewSummaries summarize_reviews(const Item& item, const std::vector<const Review*>& reviews,
                                  Domain domain, std::string_view item_info,
                                  Gateway& gateway) {
  std::vector<const Review*> positive;
  std::vector<const Review*> negative;
  for (const Review* r : reviews) {
    if (r->item_id != item.item_id)
      throw CorpusError("review " + r->review_id + " is not about " + item.item_id);
    if (r->rating >= 4) positive.push_back(r);
    else if (r->rating <= 2) negative.push_back(r);
  }
  auto run = [&](const std::vector<const Review*>& picked, bool is_positive) -> std::string {
    if (picked.empty()) return "";
    std::vector<std::string> texts;
    for (const Review* r : picked) texts.push_back(text::collapse_whitespace(r->text));
    auto req = prompts::summarize(domain, item_info, texts, is_positive);
    return text::collapse_whitespace(gateway.chat(req));
  };
  return {run(top_by_votes(positive, 5), true), run(top_by_votes(negative, 5), false)};
}

std::vector<std::string> SimContext::originals() const {
  std::vector<std::string> out;
  for (const auto& [original, _] : anonymization_map) out.push_back(original);
  return out;
}

json to_json(const SimContext& ctx) {
  json map = json::array();
  for (const auto& [o, r] : ctx.anonymization_map) map.push_back({{"original", o}, {"replacement", r}});
  return {{"target_item_id", ctx.target_item_id},
          {"domain", to_string(ctx.domain)},
          {"item_info", ctx.item_info_block},
          {"item_review_summary", ctx.review_summary_block},
          {"review_text", ctx.seed_review_text},
          {"negative_summary", ctx.negative_summary},
          {"anonymization_map", map}};
}

std::string item_info_block(const Item& item, Domain domain) {
  std::string out;
  if (domain == Domain::restaurant) {
    out = "Category: ";
    for (std::size_t i = 0; i < item.categories.size(); ++i)
      out += (i ? ", " : "") + text::to_lower(item.categories[i]);
  } else {
    out = "- Category: ";
    for (std::size_t i = 0; i < item.categories.size(); ++i)
      out += (i ? ", " : "") + item.categories[i];
  }
  for (const auto& [key, value] : item.attributes) out += fmt::format("\n- {}: {}", key, value);
  return out;
}

SimContext build_sim_context(const Item& target, const Review& seed_review,
                             const Corpus& corpus, Domain domain, Gateway& gateway) {
  if (seed_review.item_id != target.item_id)
    throw CorpusError("seed review " + seed_review.review_id + " is not about " +
                      target.item_id);
  SimContext ctx;
  ctx.target_item_id = target.item_id;
  ctx.domain = domain;
  ctx.item_info_block = anonymize(item_info_block(target, domain), target, domain).first;

  std::vector<const Review*> others;
  for (const Review* r : corpus.reviews_of(target))
    if (r->review_id != seed_review.review_id) others.push_back(r);
  auto summaries = summarize_reviews(target, others, domain, ctx.item_info_block, gateway);
  std::string positive = anonymize(summaries.positive, target, domain).first;
  if (positive.empty()) positive = "no other reviews are available.";
  ctx.review_summary_block = (domain == Domain::restaurant ? "" : "- ") +
                             std::string("What people generally like: ") + positive;
  ctx.negative_summary = anonymize(summaries.negative, target, domain).first;
  ctx.seed_review_text = anonymize(text::trim(seed_review.text), target, domain).first;

  const std::string placeholder = anonymous_reference(domain);
  for (auto& alias : item_aliases(target)) ctx.anonymization_map.emplace_back(alias, placeholder);
  return ctx;
}

std::string simulate_response(const SimContext& ctx, const std::vector<Utterance>& history,
                              std::string_view question, Gateway& gateway) {
  if (text::trim(question).empty()) throw StateError("simulator needs a question");
  std::vector<Utterance> dialogue = history;
  if (dialogue.empty() || dialogue.back().role != Role::recommender ||
      dialogue.back().text != question)
    dialogue.push_back({Role::recommender, std::string(question)});

  auto req = prompts::simulate(ctx.domain, ctx.item_info_block, ctx.review_summary_block,
                               ctx.seed_review_text, render_history(dialogue));
  const auto originals = ctx.originals();
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) req.tag = std::string(prompts::tags::simulate_retry);
    std::string answer = strip_role_prefix(text::first_line(gateway.chat(req)));
    if (answer.empty()) continue;
    if (!mentions_any(answer, originals)) return answer;
    if (attempt == 1)
      throw LeakageError("simulator named the target item " + ctx.target_item_id + " twice");
  }
  return "I don't have a particular preference about that.";
}

}  // namespace snipcrs
