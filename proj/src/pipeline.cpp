#include "sktod/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "sktod/analysis.hpp"
#include "sktod/errors.hpp"
#include "sktod/text.hpp"

namespace sktod {

std::string_view to_string(Mode m) {
    switch (m) {
    case Mode::plain_completion: return "plain_completion";
    case Mode::plain_chat: return "plain_chat";
    case Mode::cot: return "cot";
    case Mode::cot_fewshot: return "cot_fewshot";
    case Mode::waterfall: return "waterfall";
    }
    return "plain_completion";
}

Mode parse_mode(std::string_view s) {
    if (s == "plain" || s == "plain_completion") return Mode::plain_completion;
    if (s == "plain_chat" || s == "chat") return Mode::plain_chat;
    if (s == "cot") return Mode::cot;
    if (s == "cot_fewshot") return Mode::cot_fewshot;
    if (s == "waterfall") return Mode::waterfall;
    throw ValidationError("unknown mode \"" + std::string(s) +
                          "\" (expected plain, plain_chat, cot, cot_fewshot or waterfall)");
}

void RunConfig::validate() const {
    if (max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
    if (concurrency < 1) throw ValidationError("concurrency must be >= 1");
    if (responder_model.empty()) throw ValidationError("responder model name is empty");
    if (mode == Mode::waterfall && summariser_model.empty())
        throw ValidationError("waterfall mode needs a summariser model name");
    if (mode == Mode::cot_fewshot && examples.empty())
        throw ValidationError("cot_fewshot mode needs few-shot examples");
}

// --- CoT parsing -----------------------------------------------------------------

namespace {

std::string strip_known_label(std::string_view seg, std::initializer_list<std::string_view> labels) {
    auto s = text::trim(seg);
    for (auto label : labels) {
        if (!text::starts_with_ci(s, label)) continue;
        auto rest = text::trim(std::string_view(s).substr(label.size()));
        if (!rest.empty() && rest.front() == ':') rest = text::trim(std::string_view(rest).substr(1));
        return rest;
    }
    if (!s.empty() && s.front() == ':') return text::trim(std::string_view(s).substr(1));
    return s;
}

// "(3) final: X" and "(3) Final response: X" both give X.
std::string strip_short_label(std::string_view seg) {
    auto s = text::trim(seg);
    const auto colon = s.find(':');
    if (colon == std::string::npos || colon > 40) return s;
    const auto head = std::string_view(s).substr(0, colon);
    if (head.find_first_of(".?!\n") != std::string_view::npos) return s;
    if (std::count(head.begin(), head.end(), ' ') > 3) return s;
    return text::trim(std::string_view(s).substr(colon + 1));
}

std::string join_nonempty(std::string_view a, std::string_view b) {
    if (a.empty()) return std::string(b);
    if (b.empty()) return std::string(a);
    return std::string(a) + " " + std::string(b);
}

}  // namespace

CotParse parse_cot_output(std::string_view raw) {
    CotParse out;
    const auto t = text::trim(raw);
    const auto p2 = t.find("(2)");
    const auto p3 = t.find("(3)", p2 == std::string::npos ? 0 : p2);
    const auto first_marker = std::min(p2, p3);

    auto summary_seg = std::string_view(t).substr(0, first_marker == std::string::npos ? t.size() : first_marker);
    if (summary_seg.starts_with("(1)")) summary_seg.remove_prefix(3);
    out.summary = strip_known_label(summary_seg, {"summary"});

    if (first_marker == std::string::npos) {
        out.final = out.summary.empty() ? t : out.summary;
        return out;
    }
    if (p2 != std::string::npos) {
        const auto end = p3 == std::string::npos ? t.size() : p3;
        auto fu = strip_known_label(std::string_view(t).substr(p2 + 3, end - p2 - 3),
                                    {"follow-up question", "follow-up", "follow up", "followup"});
        if (!fu.empty()) out.follow_up = std::move(fu);
    }
    if (p3 != std::string::npos) out.final = strip_short_label(std::string_view(t).substr(p3 + 3));
    if (out.final.empty()) out.final = join_nonempty(out.summary, out.follow_up.value_or(""));
    return out;
}

nlohmann::ordered_json to_json(const RunStats& s) {
    auto failures = nlohmann::ordered_json::array();
    for (const auto& f : s.failures) failures.push_back({{"id", f.id}, {"error", f.message}});
    return {{"instances", s.instances},           {"seeking", s.seeking},
            {"requests", s.requests},             {"truncated_count", s.truncated_count},
            {"degraded_count", s.degraded_count}, {"failed", s.failures.size()},
            {"failures", std::move(failures)}};
}

std::vector<Selection> selections_from_labels(const std::vector<DialogueInstance>& instances) {
    std::vector<Selection> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) {
        if (!inst.label)
            throw ValidationError("instance " + std::to_string(inst.id) +
                                  " has no label; pass a selection file to generate without labels");
        out.push_back({inst.label->target, inst.label->refs});
    }
    return out;
}

std::vector<Selection> selections_from_predictions(const std::vector<Prediction>& preds, std::size_t expected) {
    if (preds.size() != expected)
        throw ValidationError("selection file has " + std::to_string(preds.size()) + " entries, expected " +
                              std::to_string(expected));
    std::vector<Selection> out;
    out.reserve(preds.size());
    for (const auto& p : preds) out.push_back({p.target, p.refs});
    return out;
}

// --- generation ------------------------------------------------------------------

namespace {

std::pair<std::vector<Snippet>, std::vector<Snippet>> split_kinds(const std::vector<Snippet>& knowledge) {
    std::vector<Snippet> faqs, reviews;
    for (const auto& s : knowledge) (s.kind == DocType::faq ? faqs : reviews).push_back(s);
    return {faqs, reviews};
}

}  // namespace

std::vector<PromptBundle> preview_prompts(const DialogueInstance& inst, const std::vector<Snippet>& knowledge,
                                          const RunConfig& cfg) {
    const auto ktext = format_knowledge(knowledge);
    switch (cfg.mode) {
    case Mode::plain_completion: return {build_completion_prompt(inst.turns, ktext, cfg.max_tokens)};
    case Mode::plain_chat: return {build_chat_messages(inst.turns, ktext, cfg.max_tokens)};
    case Mode::cot: return {build_cot_messages(inst.turns, ktext, {}, cfg.max_tokens)};
    case Mode::cot_fewshot: return {build_cot_messages(inst.turns, ktext, cfg.examples, cfg.max_tokens)};
    case Mode::waterfall: {
        auto [faqs, reviews] = split_kinds(knowledge);
        return {build_summarisation_prompt(faqs, reviews, cfg.max_tokens)};
    }
    }
    return {};
}

WaterfallOutcome run_waterfall(const DialogueInstance& inst, const std::vector<Snippet>& knowledge,
                               Backend& summariser, Backend& responder, const RunConfig& cfg) {
    WaterfallOutcome out;
    auto [faqs, reviews] = split_kinds(knowledge);
    std::string summary;
    if (!faqs.empty() || !reviews.empty()) {
        const auto step1 = summariser.generate({build_summarisation_prompt(faqs, reviews, cfg.max_tokens),
                                                cfg.summariser_model});
        ++out.requests;
        out.truncated += step1.truncated;
        summary = text::normalize_whitespace(step1.text);
    }
    if (summary.empty()) {
        std::vector<std::string> parts;
        for (const auto& s : knowledge) parts.push_back(s.text);
        out.response = text::normalize_whitespace(text::join(parts, " "));
        out.degraded = true;
        return out;
    }
    const auto step2 = responder.generate(
        {build_waterfall_messages(inst.turns, format_knowledge(knowledge), summary, cfg.max_tokens),
         cfg.responder_model});
    ++out.requests;
    out.truncated += step2.truncated;
    const auto parsed = parse_cot_output("(1) summary: " + summary + "\n(2) follow-up:" + step2.text);
    out.response = text::normalize_whitespace(parsed.final);
    return out;
}

RunResult run_generation(const std::vector<DialogueInstance>& instances, const KnowledgeBase& kb,
                         const std::vector<Selection>& selection, Backend& responder, Backend* summariser,
                         const RunConfig& cfg) {
    cfg.validate();
    if (selection.size() != instances.size())
        throw ValidationError("selection has " + std::to_string(selection.size()) + " entries for " +
                              std::to_string(instances.size()) + " instances");
    if (cfg.mode == Mode::waterfall && summariser == nullptr) summariser = &responder;

    RunResult result;
    result.stats.instances = instances.size();
    result.predictions.resize(instances.size());

    // Resolve all knowledge up front so reference errors surface before any request.
    std::vector<std::vector<Snippet>> knowledge(instances.size());
    std::vector<std::size_t> work;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        auto& pred = result.predictions[i];
        pred.id = instances[i].id;
        pred.target = selection[i].target;
        if (!pred.target) continue;
        pred.refs = selection[i].refs;
        knowledge[i] = resolve_refs(kb, pred.refs);
        work.push_back(i);
    }
    result.stats.seeking = work.size();

    struct Slot {
        std::size_t requests = 0;
        std::size_t truncated = 0;
        bool degraded = false;
        std::optional<std::string> error;
    };
    std::vector<Slot> slots(instances.size());

    auto process = [&](std::size_t i) {
        auto& slot = slots[i];
        auto& pred = result.predictions[i];
        try {
            if (cfg.mode == Mode::waterfall) {
                auto w = run_waterfall(instances[i], knowledge[i], *summariser, responder, cfg);
                slot.requests = w.requests;
                slot.truncated = w.truncated;
                slot.degraded = w.degraded;
                pred.response = std::move(w.response);
                pred.truncated = w.truncated > 0;
                return;
            }
            const auto bundle = preview_prompts(instances[i], knowledge[i], cfg).front();
            const auto r = responder.generate({bundle, cfg.responder_model});
            slot.requests = 1;
            slot.truncated = r.truncated;
            pred.truncated = r.truncated;
            if (cfg.mode == Mode::cot || cfg.mode == Mode::cot_fewshot)
                pred.response = text::normalize_whitespace(parse_cot_output(r.text).final);
            else
                pred.response = text::normalize_whitespace(r.text);
        } catch (const std::exception& e) {
            slot.error = e.what();
            pred.response.clear();
        }
    };

    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.concurrency), work.size());
    if (workers <= 1) {
        for (auto i : work) process(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < work.size(); k = next++) process(work[k]);
            });
        }
    }

    // Aggregate in instance order so the stats never depend on scheduling.
    for (auto i : work) {
        const auto& slot = slots[i];
        result.stats.requests += slot.requests;
        result.stats.truncated_count += slot.truncated;
        result.stats.degraded_count += slot.degraded;
        if (slot.error) result.stats.failures.push_back({instances[i].id, *slot.error});
    }
    return result;
}

// --- post-processing ---------------------------------------------------------------

std::vector<Prediction> postprocess_append_mfq(std::vector<Prediction> preds, std::string_view mfq_raw) {
    const auto mfq = text::normalize_whitespace(mfq_raw);
    if (mfq.empty() || mfq.back() != '?') throw ValidationError("MFQ must end with '?'");
    if (text::split_sentences(mfq).size() != 1) throw ValidationError("MFQ must be a single sentence");
    for (auto& p : preds) {
        if (!p.target || split_response(p.response).question) continue;
        const auto base = text::rtrim(p.response);
        p.response = base.empty() ? mfq : base + " " + mfq;
    }
    return preds;
}

std::vector<Prediction> postprocess_strip_questions(std::vector<Prediction> preds) {
    for (auto& p : preds) {
        if (!p.target) continue;
        auto split = split_response(p.response);
        if (!split.question) continue;
        while (split.question) {
            p.response = split.summary;
            split = split_response(p.response);
        }
    }
    return preds;
}

std::vector<Prediction> ingest_external_predictions(const std::filesystem::path& path) {
    return load_predictions(path);
}

}  // namespace sktod
