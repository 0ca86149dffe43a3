#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sktod/corpus.hpp"
#include "sktod/sentiment.hpp"

namespace sktod {

inline constexpr int kDefaultMaxTokens = 256;

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view s);

struct ChatMessage {
    Role role = Role::user;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

enum class PromptKind { completion, chat };

struct PromptBundle {
    PromptKind kind = PromptKind::completion;
    std::optional<std::string> text;
    std::optional<std::vector<ChatMessage>> messages;
    int max_tokens = kDefaultMaxTokens;
    double temperature = 0.0;

    bool operator==(const PromptBundle&) const = default;

    // Throws ValidationError if the kind/payload pairing or a message is broken.
    void validate() const;
    static PromptBundle completion(std::string text, int max_tokens = kDefaultMaxTokens);
    static PromptBundle chat(std::vector<ChatMessage> messages, int max_tokens = kDefaultMaxTokens);
};

nlohmann::ordered_json to_json(const PromptBundle& b);
PromptBundle bundle_from_json(const nlohmann::json& j);

// Human-readable rendering used by golden files and --dry-run: completion
// prompts verbatim, chat prompts as "### role" headed blocks.
std::string render(const PromptBundle& b);

struct FewShotExample {
    DialogueInstance dialogue;
    std::string knowledge_text;
    std::string response;
};

// "Review: ..." / "FAQ: ..." one per line.
std::string format_knowledge(const std::vector<Snippet>& snippets);
// "U: ..." / "S: ..." one per line.
std::string format_dialogue(const std::vector<Turn>& turns);

PromptBundle build_completion_prompt(const std::vector<Turn>& dialogue, std::string_view knowledge_text,
                                     int max_tokens = kDefaultMaxTokens);

// Throws ValidationError unless the last turn is a user turn.
PromptBundle build_chat_messages(const std::vector<Turn>& dialogue, std::string_view knowledge_text,
                                 int max_tokens = kDefaultMaxTokens);

// Each example becomes a user message (the full instruction block) followed
// by an assistant message holding the worked solution. max_tokens is doubled.
PromptBundle build_cot_messages(const std::vector<Turn>& dialogue, std::string_view knowledge_text,
                                const std::vector<FewShotExample>& examples = {},
                                int max_tokens = kDefaultMaxTokens);

PromptBundle build_summarisation_prompt(const std::vector<Snippet>& faqs, const std::vector<Snippet>& reviews,
                                        int max_tokens = kDefaultMaxTokens);

// Throws ValidationError on an empty (all-whitespace) summary.
PromptBundle build_waterfall_messages(const std::vector<Turn>& dialogue, std::string_view knowledge_text,
                                      std::string_view summary, int max_tokens = kDefaultMaxTokens);

struct FewShotBands {
    double items_mean = 0.0, items_std = 0.0;
    double sentiment_mean = 0.0, sentiment_std = 0.0;

    double items_lo() const { return items_mean + items_std; }
    double items_hi() const { return items_mean + 2.0 * items_std; }
    double sentiment_lo() const { return sentiment_mean - 2.0 * sentiment_std; }
    double sentiment_hi() const { return sentiment_mean - sentiment_std; }
};

// Population statistics over the knowledge-seeking training instances.
FewShotBands few_shot_bands(const std::vector<DialogueInstance>& train, const SentimentLexicon& lex,
                            const KnowledgeBase& kb);

// Instances inside both bands (inclusive), then round(k/3) with a question in
// the reference and the rest without, each taken by ascending id.
std::vector<FewShotExample> select_few_shot(const std::vector<DialogueInstance>& train, const SentimentLexicon& lex,
                                            const KnowledgeBase& kb, std::size_t k = 3);

}  // namespace sktod
