#include "sktod/prompting.hpp"

#include <algorithm>
#include <cmath>

#include "sktod/analysis.hpp"
#include "sktod/errors.hpp"
#include "sktod/text.hpp"

namespace sktod {

std::string_view to_string(Role role) {
    switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}

Role parse_role(std::string_view s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    throw ParseError("unknown message role \"" + std::string(s) + "\"");
}

void PromptBundle::validate() const {
    if (max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
    if (kind == PromptKind::completion) {
        if (!text || messages) throw ValidationError("completion bundle must carry text only");
        return;
    }
    if (!messages || text) throw ValidationError("chat bundle must carry messages only");
    if (messages->empty()) throw ValidationError("chat bundle has no messages");
    for (std::size_t i = 0; i < messages->size(); ++i) {
        if ((*messages)[i].content.empty())
            throw ValidationError("chat message " + std::to_string(i) + " has empty content");
    }
}

PromptBundle PromptBundle::completion(std::string text, int max_tokens) {
    PromptBundle b;
    b.kind = PromptKind::completion;
    b.text = std::move(text);
    b.max_tokens = max_tokens;
    b.validate();
    return b;
}

PromptBundle PromptBundle::chat(std::vector<ChatMessage> messages, int max_tokens) {
    PromptBundle b;
    b.kind = PromptKind::chat;
    b.messages = std::move(messages);
    b.max_tokens = max_tokens;
    b.validate();
    return b;
}

nlohmann::ordered_json to_json(const PromptBundle& b) {
    nlohmann::ordered_json j;
    j["kind"] = b.kind == PromptKind::chat ? "chat" : "completion";
    if (b.text) j["text"] = *b.text;
    if (b.messages) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& m : *b.messages) arr.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
        j["messages"] = std::move(arr);
    }
    j["max_tokens"] = b.max_tokens;
    j["temperature"] = b.temperature;
    return j;
}

PromptBundle bundle_from_json(const nlohmann::json& j) {
    try {
        PromptBundle b;
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "chat") b.kind = PromptKind::chat;
        else if (kind == "completion") b.kind = PromptKind::completion;
        else throw ParseError("unknown bundle kind \"" + kind + "\"");
        if (j.contains("text")) b.text = j.at("text").get<std::string>();
        if (j.contains("messages")) {
            std::vector<ChatMessage> msgs;
            for (const auto& m : j.at("messages"))
                msgs.push_back({parse_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
            b.messages = std::move(msgs);
        }
        b.max_tokens = j.at("max_tokens").get<int>();
        b.temperature = j.value("temperature", 0.0);
        b.validate();
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("prompt bundle: ") + e.what());
    }
}

std::string render(const PromptBundle& b) {
    if (b.kind == PromptKind::completion) return b.text.value_or("");
    std::string out;
    for (const auto& m : b.messages.value_or(std::vector<ChatMessage>{})) {
        if (!out.empty()) out += "\n\n";
        out += "### ";
        out += to_string(m.role);
        out += "\n";
        out += m.content;
    }
    return out;
}

std::string format_knowledge(const std::vector<Snippet>& snippets) {
    std::string out;
    for (const auto& s : snippets) {
        if (!out.empty()) out += "\n";
        out += s.kind == DocType::review ? "Review: " : "FAQ: ";
        out += s.text;
    }
    return out;
}

std::string format_dialogue(const std::vector<Turn>& turns) {
    std::string out;
    for (const auto& t : turns) {
        if (!out.empty()) out += "\n";
        out += t.speaker == Speaker::user ? "U: " : "S: ";
        out += t.text;
    }
    return out;
}

PromptBundle build_completion_prompt(const std::vector<Turn>& dialogue, std::string_view knowledge_text,
                                     int max_tokens) {
    std::string text = "DIALOGUE:\n";
    text += format_dialogue(dialogue);
    text += "\n\nKNOWLEDGE:\n";
    text += knowledge_text;
    text += "\n\nRESPONSE:";
    return PromptBundle::completion(std::move(text), max_tokens);
}

PromptBundle build_chat_messages(const std::vector<Turn>& dialogue, std::string_view knowledge_text,
                                 int max_tokens) {
    if (dialogue.empty() || dialogue.back().speaker != Speaker::user)
        throw ValidationError("chat prompt: dialogue must end with a user turn");
    std::vector<ChatMessage> msgs;
    msgs.push_back({Role::system,
                    "You are a helpful assistant with access to the following:\n" + std::string(knowledge_text)});
    for (const auto& t : dialogue)
        msgs.push_back({t.speaker == Speaker::user ? Role::user : Role::assistant, t.text});
    return PromptBundle::chat(std::move(msgs), max_tokens);
}

namespace {

constexpr std::string_view kProcedureHead =
    "You are assisting a user. Create a response for the user, using the following procedure:\n"
    "(1) First, summarise the available knowledge into a couple sentences.\n"
    "(2) Then, create a short follow-up question given the dialogue history.\n";

std::string procedure_block(std::string_view step3, const std::vector<Turn>& dialogue,
                            std::string_view knowledge_text) {
    std::string out(kProcedureHead);
    out += step3;
    out += "\n\nKnowledge:\n";
    out += knowledge_text;
    out += "\n\nDialogue history:\n";
    out += format_dialogue(dialogue);
    out += "\n\nSolution:\n(1) summary:";
    return out;
}

std::string cot_query(const std::vector<Turn>& dialogue, std::string_view knowledge_text) {
    return procedure_block("(3) Create the final response to the user as <summary><follow-up>", dialogue,
                           knowledge_text);
}

std::string worked_solution(const FewShotExample& ex) {
    const auto split = split_response(ex.response);
    std::string out = split.summary;
    out += "\n(2) follow-up:";
    if (split.question) out += " " + *split.question;
    out += "\n(3) final: ";
    out += text::normalize_whitespace(ex.response);
    return out;
}

}  // namespace

PromptBundle build_cot_messages(const std::vector<Turn>& dialogue, std::string_view knowledge_text,
                                const std::vector<FewShotExample>& examples, int max_tokens) {
    if (examples.size() > 3) throw ValidationError("chain-of-thought prompt takes at most 3 examples");
    std::vector<ChatMessage> msgs;
    for (const auto& ex : examples) {
        msgs.push_back({Role::user, cot_query(ex.dialogue.turns, ex.knowledge_text)});
        msgs.push_back({Role::assistant, worked_solution(ex)});
    }
    msgs.push_back({Role::user, cot_query(dialogue, knowledge_text)});
    return PromptBundle::chat(std::move(msgs), max_tokens * 2);
}

PromptBundle build_summarisation_prompt(const std::vector<Snippet>& faqs, const std::vector<Snippet>& reviews,
                                        int max_tokens) {
    auto lines = [](const std::vector<Snippet>& snippets) {
        std::string out;
        for (const auto& s : snippets) {
            if (!out.empty()) out += "\n";
            out += s.text;
        }
        return out;
    };
    std::string text = "Summarize the following into one or two sentences max:\n\nFAQs:\n";
    text += lines(faqs);
    text += "\n\nReviews:\n";
    text += lines(reviews);
    return PromptBundle::completion(std::move(text), max_tokens);
}

PromptBundle build_waterfall_messages(const std::vector<Turn>& dialogue, std::string_view knowledge_text,
                                      std::string_view summary, int max_tokens) {
    const auto cleaned = text::trim(summary);
    if (cleaned.empty()) throw ValidationError("waterfall prompt: summary is empty");
    auto content = procedure_block("(3) Create a final brief response to the user as <summary><follow-up>", dialogue,
                                   knowledge_text);
    content += "\n";
    content += cleaned;
    content += "\n(2) follow-up:";
    return PromptBundle::chat({{Role::user, std::move(content)}}, max_tokens);
}

// --- few-shot selection ------------------------------------------------------------

namespace {

struct Candidate {
    const DialogueInstance* inst;
    double items;
    double sentiment;
};

std::vector<Candidate> seeking_sorted(const std::vector<DialogueInstance>& train, const SentimentLexicon& lex,
                                      const KnowledgeBase& kb) {
    std::vector<const DialogueInstance*> order;
    for (const auto& inst : train)
        if (inst.label && inst.label->target) order.push_back(&inst);
    // Sorting first makes the floating-point sums independent of input order.
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });
    std::vector<Candidate> out;
    out.reserve(order.size());
    for (auto* inst : order) {
        const auto s = dialogue_knowledge_sentiment(lex, kb, inst->label->refs);
        out.push_back({inst, static_cast<double>(inst->label->refs.size()), s.mean});
    }
    return out;
}

std::pair<double, double> mean_std(const std::vector<Candidate>& c, double Candidate::*field) {
    double sum = 0.0;
    for (const auto& x : c) sum += x.*field;
    const double mean = sum / static_cast<double>(c.size());
    double ss = 0.0;
    for (const auto& x : c) ss += (x.*field - mean) * (x.*field - mean);
    return {mean, std::sqrt(ss / static_cast<double>(c.size()))};
}

FewShotBands bands_of(const std::vector<Candidate>& c) {
    if (c.empty()) throw ValidationError("few-shot selection: training set has no knowledge-seeking instances");
    FewShotBands b;
    std::tie(b.items_mean, b.items_std) = mean_std(c, &Candidate::items);
    std::tie(b.sentiment_mean, b.sentiment_std) = mean_std(c, &Candidate::sentiment);
    return b;
}

}  // namespace

FewShotBands few_shot_bands(const std::vector<DialogueInstance>& train, const SentimentLexicon& lex,
                            const KnowledgeBase& kb) {
    return bands_of(seeking_sorted(train, lex, kb));
}

std::vector<FewShotExample> select_few_shot(const std::vector<DialogueInstance>& train, const SentimentLexicon& lex,
                                            const KnowledgeBase& kb, std::size_t k) {
    if (k == 0) return {};
    const auto all = seeking_sorted(train, lex, kb);
    const auto bands = bands_of(all);

    std::size_t in_items = 0, in_sentiment = 0;
    std::vector<const DialogueInstance*> with_q, without_q;
    for (const auto& c : all) {
        const bool ok_items = c.items >= bands.items_lo() && c.items <= bands.items_hi();
        const bool ok_sent = c.sentiment >= bands.sentiment_lo() && c.sentiment <= bands.sentiment_hi();
        in_items += ok_items;
        in_sentiment += ok_sent;
        if (!ok_items || !ok_sent) continue;
        (split_response(c.inst->label->response).question ? with_q : without_q).push_back(c.inst);
    }

    const auto want_q = static_cast<std::size_t>(std::lround(static_cast<double>(k) / 3.0));
    const std::size_t want_plain = k - want_q;
    if (with_q.size() < want_q || without_q.size() < want_plain) {
        throw ValidationError("few-shot selection: not enough candidates (" + std::to_string(all.size()) +
                              " seeking, " + std::to_string(in_items) + " in item band, " +
                              std::to_string(in_sentiment) + " in sentiment band, " +
                              std::to_string(with_q.size()) + " in both with a question, " +
                              std::to_string(without_q.size()) + " in both without; need " + std::to_string(want_q) +
                              " + " + std::to_string(want_plain) + ")");
    }
    std::vector<const DialogueInstance*> picked(with_q.begin(), with_q.begin() + static_cast<long>(want_q));
    picked.insert(picked.end(), without_q.begin(), without_q.begin() + static_cast<long>(want_plain));
    std::sort(picked.begin(), picked.end(), [](auto* a, auto* b) { return a->id < b->id; });

    std::vector<FewShotExample> out;
    for (auto* inst : picked)
        out.push_back({*inst, format_knowledge(resolve_refs(kb, inst->label->refs)), inst->label->response});
    return out;
}

}  // namespace sktod
