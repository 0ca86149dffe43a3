#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sktod/backend.hpp"
#include "sktod/corpus.hpp"
#include "sktod/errors.hpp"
#include "sktod/prompting.hpp"

namespace sktod {

// Model output that the repair rules could not turn into reviews. Keeps the
// raw text so the failure can be audited.
class AugmentParseError : public ParseError {
public:
    AugmentParseError(const std::string& what, std::string raw) : ParseError(what), raw_(std::move(raw)) {}
    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};

// Case-insensitive alias -> canonical traveler type. Canonical names always
// map to themselves.
class TravelerTypeMap {
public:
    TravelerTypeMap() = default;
    explicit TravelerTypeMap(const std::map<std::string, std::string>& aliases);

    static TravelerTypeMap from_json(const nlohmann::json& j);
    static TravelerTypeMap load(const std::filesystem::path& path);

    std::optional<std::string> canonical(std::string_view type) const;
    std::set<std::string> canonical_names() const;

private:
    std::map<std::string, std::string> by_key_;  // lowercased, trimmed alias -> canonical
};

struct NormalizeReport {
    std::size_t changed = 0;
    std::map<std::string, std::size_t> unknown;  // type -> reviews carrying it
};

NormalizeReport normalize_traveler_types(IdMap<Review>& reviews, const TravelerTypeMap& map);
NormalizeReport normalize_traveler_types(KnowledgeBase& kb, const TravelerTypeMap& map);

struct ReviewPromptOptions {
    int per_entity_types = 5;
    int sentences_per_review = 5;
    int max_tokens = 1024;
};

// Throws ValidationError when the entity has no reviews.
PromptBundle build_review_prompt(const Entity& entity, const ReviewPromptOptions& opts = {});

// Throws ValidationError when `faqs` is empty.
PromptBundle build_domain_review_prompt(std::string_view entity_id, std::string_view entity_name,
                                        const IdMap<Faq>& faqs, int max_tokens = 512);

// Continuation stub the review prompt ends with.
std::string review_stub(long long next_id);

struct ParsedReviews {
    IdMap<Review> reviews;
    std::string repaired;              // the JSON text that was finally parsed
    std::vector<std::string> repairs;  // rules that changed the text, in order
};

// Tolerant parse of a review-prompt continuation. Repair rules, in order:
// re-prepend the stub, single -> double quotes, drop trailing commas, balance
// braces. Ids must run start_id, start_id+1, ... without gaps.
ParsedReviews parse_generated_reviews(std::string_view text, long long start_id);

// "traveler type: review" lines; bullets and numbering are ignored.
std::vector<Review> parse_domain_reviews(std::string_view text);

struct AugmentOptions {
    ReviewPromptOptions prompt;
    std::string model = "gpt-3.5-turbo";
    std::vector<std::string> domains = {"hotel", "restaurant"};
};

struct AugmentReport {
    std::size_t entities = 0;
    std::size_t added_reviews = 0;
    std::size_t truncated = 0;
    NormalizeReport types;
    std::vector<std::pair<std::string, std::string>> failures;  // "domain/entity", message
};

nlohmann::ordered_json to_json(const AugmentReport& r);

// Generates new reviews for every entity of the configured domains and merges
// them. Entities are processed in (domain, id) order.
KnowledgeBase augment_existing(const KnowledgeBase& kb, Backend& backend, const AugmentOptions& opts,
                               const TravelerTypeMap* types, AugmentReport& report);

// Entities from `extra` (name + FAQs, no reviews) get generated reviews and
// are merged into `kb`.
KnowledgeBase augment_new_domains(const KnowledgeBase& kb, const KnowledgeBase& extra, Backend& backend,
                                  const std::string& model, const TravelerTypeMap* types, AugmentReport& report);

struct AugmentationStats {
    std::map<std::string, std::size_t> original_by_type;
    std::map<std::string, std::size_t> added_by_type;
    std::size_t original_sentences = 0;
    std::size_t added_sentences = 0;
    std::optional<double> original_avg_sentence_chars;
    std::optional<double> added_avg_sentence_chars;
};

// Throws ValidationError unless every original review is present unchanged.
AugmentationStats augmentation_stats(const KnowledgeBase& original, const KnowledgeBase& augmented);
nlohmann::ordered_json to_json(const AugmentationStats& s);

}  // namespace sktod
