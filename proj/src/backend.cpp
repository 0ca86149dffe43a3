#include "sktod/backend.hpp"

#include <cstdlib>
#include <sstream>

#include "sktod/text.hpp"

namespace sktod {

nlohmann::ordered_json to_json(const GenerationRequest& r) {
    return {{"model", r.model}, {"bundle", to_json(r.bundle)}};
}

GenerationRequest request_from_json(const nlohmann::json& j) {
    try {
        return {bundle_from_json(j.at("bundle")), j.at("model").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("generation request: ") + e.what());
    }
}

nlohmann::ordered_json to_json(const GenerationResult& r) {
    nlohmann::ordered_json j = {{"text", r.text}, {"truncated", r.truncated}};
    if (r.prompt_tokens) j["prompt_tokens"] = *r.prompt_tokens;
    if (r.completion_tokens) j["completion_tokens"] = *r.completion_tokens;
    return j;
}

GenerationResult result_from_json(const nlohmann::json& j) {
    try {
        GenerationResult r;
        r.text = j.at("text").get<std::string>();
        r.truncated = j.value("truncated", false);
        if (j.contains("prompt_tokens")) r.prompt_tokens = j.at("prompt_tokens").get<int>();
        if (j.contains("completion_tokens")) r.completion_tokens = j.at("completion_tokens").get<int>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("generation result: ") + e.what());
    }
}

std::string api_key_from_env() {
    const char* key = std::getenv("LLM_API_KEY");
    if (key == nullptr || *key == '\0') throw AuthError("LLM_API_KEY is not set");
    return key;
}

// --- mock ------------------------------------------------------------------------

namespace {

std::vector<std::string> lines_of(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

std::optional<std::string> first_snippet(std::string_view prompt) {
    const auto lines = lines_of(prompt);
    for (const auto& line : lines) {
        if (line.starts_with("Review: ")) return line.substr(8);
        if (line.starts_with("FAQ: ")) return line.substr(5);
    }
    // Summarisation prompt: bare snippets under "FAQs:" / "Reviews:" headers.
    bool in_section = false;
    for (const auto& line : lines) {
        const auto t = text::trim(line);
        if (t == "FAQs:" || t == "Reviews:") {
            in_section = true;
            continue;
        }
        if (in_section && !t.empty()) return t;
    }
    return std::nullopt;
}

std::string first_sentence(const std::optional<std::string>& snippet) {
    if (!snippet) return "I'm sorry, I could not find that information.";
    const auto sentences = text::split_sentences(*snippet);
    return sentences.empty() ? text::trim(*snippet) : sentences.front();
}

}  // namespace

GenerationResult MockBackend::generate(const GenerationRequest& request) {
    request.bundle.validate();
    std::string query;
    std::string fallback;
    if (request.bundle.kind == PromptKind::completion) {
        query = *request.bundle.text;
    } else {
        for (const auto& m : *request.bundle.messages) {
            if (m.role == Role::user) query = m.content;
            if (m.role == Role::system) fallback = m.content;
        }
    }
    auto snippet = first_snippet(query);
    if (!snippet) snippet = first_snippet(fallback);
    const auto s = first_sentence(snippet);
    const std::string q(kMostFrequentQuestion);

    GenerationResult r;
    if (query.starts_with("Please provide new reviews")) {
        r.text = " \"Solo travelers\", \"sentences\": {\"0\": \"" + std::string("The stay was pleasant and the staff were kind.") +
                 "\", \"1\": \"I would come back.\"}},";
    } else if (query.starts_with("Given this example:")) {
        r.text = "Solo travelers: It was a pleasant visit.\nCouples: We enjoyed our time here.\n"
                 "Families: The kids had fun and so did we.";
    } else if (query.starts_with("Summarize the following")) {
        r.text = s;
    } else if (query.ends_with("(1) summary:")) {
        r.text = " " + s + "\n(2) follow-up: " + q + "\n(3) final: " + s + " " + q;
    } else if (query.ends_with("(2) follow-up:")) {
        r.text = " " + q;
    } else {
        r.text = s + " " + q;
    }
    return r;
}

}  // namespace sktod
