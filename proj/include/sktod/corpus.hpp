#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace sktod {

// Orders decimal-string ids by numeric value ("2" < "10"); non-numeric keys
// fall back to plain lexicographic order after all numeric ones.
struct NumericIdLess {
    using is_transparent = void;
    bool operator()(std::string_view a, std::string_view b) const;
};

template <typename T>
using IdMap = std::map<std::string, T, NumericIdLess>;

struct Review {
    std::string traveler_type;
    IdMap<std::string> sentences;

    bool operator==(const Review&) const = default;
};

struct Faq {
    std::string question;
    std::string answer;

    bool operator==(const Faq&) const = default;
};

struct Entity {
    std::string name;
    IdMap<Review> reviews;
    IdMap<Faq> faqs;

    bool operator==(const Entity&) const = default;
};

using Domain = IdMap<Entity>;

struct KnowledgeCounts {
    std::size_t entities = 0;
    std::size_t reviews = 0;
    std::size_t sentences = 0;
    std::size_t faqs = 0;
};

struct KnowledgeBase {
    std::map<std::string, Domain> domains;

    KnowledgeCounts counts() const;
    const Entity* find_entity(std::string_view domain, std::string_view entity_id) const;

    bool operator==(const KnowledgeBase&) const = default;
};

enum class DocType { review, faq };

std::string_view to_string(DocType t);
DocType parse_doc_type(std::string_view s);

struct KnowledgeRef {
    std::string domain;
    std::string entity_id;
    DocType doc_type = DocType::review;
    std::string doc_id;
    std::optional<std::string> sent_id;

    auto operator<=>(const KnowledgeRef&) const = default;
};

struct Snippet {
    DocType kind = DocType::review;
    std::string text;

    bool operator==(const Snippet&) const = default;
};

enum class Speaker { user, system };

struct Turn {
    Speaker speaker = Speaker::user;
    std::string text;

    bool operator==(const Turn&) const = default;
};

struct Label {
    bool target = false;
    std::vector<KnowledgeRef> refs;
    std::string response;

    bool operator==(const Label&) const = default;
};

struct DialogueInstance {
    std::size_t id = 0;
    std::vector<Turn> turns;
    std::optional<Label> label;

    // Text of the final user turn, or empty when there is none.
    std::string last_user_utterance() const;
};

struct Prediction {
    std::size_t id = 0;
    bool target = false;
    std::vector<KnowledgeRef> refs;
    std::string response;
    bool truncated = false;

    bool operator==(const Prediction&) const = default;
};

// --- knowledge file ---------------------------------------------------------

KnowledgeBase parse_knowledge(const nlohmann::json& doc);
KnowledgeBase load_knowledge(const std::filesystem::path& path);
// Serialises with numeric key order so a load/save cycle is stable.
nlohmann::ordered_json knowledge_to_json(const KnowledgeBase& kb);
nlohmann::ordered_json reviews_to_json(const IdMap<Review>& reviews);
void save_knowledge(const KnowledgeBase& kb, const std::filesystem::path& path);

// Throws ValidationError naming the first broken invariant.
void validate_knowledge(const KnowledgeBase& kb);

// --- dialogues, labels, predictions ------------------------------------------

std::vector<std::vector<Turn>> load_logs(const std::filesystem::path& path);
std::vector<Label> load_labels(const std::filesystem::path& path);

// labels_path may be empty for inference mode (no labels attached).
std::vector<DialogueInstance> load_dialogues(const std::filesystem::path& logs_path,
                                             const std::optional<std::filesystem::path>& labels_path);

KnowledgeRef parse_ref(const nlohmann::json& j);
nlohmann::ordered_json ref_to_json(const KnowledgeRef& ref);

std::vector<Prediction> parse_predictions(const nlohmann::json& doc);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);
nlohmann::ordered_json predictions_to_json(const std::vector<Prediction>& preds);
void write_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path);

// Gold labels viewed as a prediction list (self-evaluation, selection input).
std::vector<Prediction> labels_as_predictions(const std::vector<DialogueInstance>& instances);

// --- knowledge operations ---------------------------------------------------

Snippet resolve_ref(const KnowledgeBase& kb, const KnowledgeRef& ref);
std::vector<Snippet> resolve_refs(const KnowledgeBase& kb, const std::vector<KnowledgeRef>& refs);

// Appends the reviews and FAQs of `extra` to `base`. Colliding review or
// FAQ ids are renumbered to the next free id; entities unknown to `base`
// are added when they carry a name.
KnowledgeBase merge_knowledge(const KnowledgeBase& base, const KnowledgeBase& extra);

// Smallest id strictly greater than every numeric key in the map (0 if none).
template <typename T>
long long next_free_id(const IdMap<T>& m) {
    long long next = 0;
    for (const auto& [k, v] : m) {
        (void)v;
        if (!k.empty() && k.find_first_not_of("0123456789") == std::string::npos)
            next = std::max(next, std::stoll(k) + 1);
    }
    return next;
}

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace sktod
