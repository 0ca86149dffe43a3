#include <doctest.h>

#include <atomic>
#include <mutex>
#include <random>

#include "common/test_util.hpp"
#include "sktod/analysis.hpp"
#include "sktod/errors.hpp"
#include "sktod/pipeline.hpp"
#include "sktod/text.hpp"

using namespace sktod;

namespace {

// Replies from a fixed script keyed by call order; thread-safe.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::vector<GenerationResult> script) : script_(std::move(script)) {}
    GenerationResult generate(const GenerationRequest& req) override {
        std::lock_guard lock(mu_);
        seen.push_back(req);
        if (calls_ >= script_.size()) throw BackendError("script exhausted");
        return script_[calls_++];
    }
    std::string name() const override { return "scripted"; }
    std::vector<GenerationRequest> seen;

private:
    std::vector<GenerationResult> script_;
    std::size_t calls_ = 0;
    std::mutex mu_;
};

// Truncates every response whose prompt mentions one of the marker strings.
class MarkerBackend : public Backend {
public:
    GenerationResult generate(const GenerationRequest& req) override {
        const auto text = render(req.bundle);
        if (text.find("FAILME") != std::string::npos) throw TransportError("boom");
        return {"Answer. Anything else?", text.find("TRUNC") != std::string::npos};
    }
    std::string name() const override { return "marker"; }
};

struct Fixture {
    KnowledgeBase kb = load_knowledge(fixture("knowledge.json"));
    std::vector<DialogueInstance> inst = load_dialogues(fixture("logs.json"), fixture("labels.json"));
};

Prediction target(std::size_t id, std::string response) {
    Prediction p;
    p.id = id;
    p.target = true;
    p.refs = {{"hotel", "0", DocType::faq, "0", std::nullopt}};
    p.response = std::move(response);
    return p;
}

}  // namespace

TEST_SUITE("pipeline") {
    TEST_CASE("mode names") {
        CHECK(parse_mode("plain") == Mode::plain_completion);
        CHECK(parse_mode("chat") == Mode::plain_chat);
        CHECK(parse_mode("waterfall") == Mode::waterfall);
        CHECK(parse_mode(to_string(Mode::cot_fewshot)) == Mode::cot_fewshot);
        CHECK_THROWS_AS(parse_mode("zero-shot"), ValidationError);
    }

    TEST_CASE("chain-of-thought output parsing") {
        auto full = parse_cot_output("(1) summary: Rooms are big.\n(2) follow-up: Want to book?\n(3) final: Rooms are big. Want to book?");
        CHECK(full.summary == "Rooms are big.");
        CHECK(*full.follow_up == "Want to book?");
        CHECK(full.final == "Rooms are big. Want to book?");

        // continuation after the "(1) summary:" prompt tail
        auto tail = parse_cot_output(" Rooms are big.\n(2) follow-up: Want to book?\n(3) Create the final response: Sure. Want to book?");
        CHECK(tail.summary == "Rooms are big.");
        CHECK(tail.final == "Sure. Want to book?");

        auto no3 = parse_cot_output("Rooms are big.\n(2) follow-up: Want to book?");
        CHECK(no3.final == "Rooms are big. Want to book?");

        auto none = parse_cot_output("Just an answer.");
        CHECK(none.final == "Just an answer.");
        CHECK_FALSE(none.follow_up);

        auto empty_fu = parse_cot_output("S.\n(2) follow-up:\n(3) final:");
        CHECK_FALSE(empty_fu.follow_up);
        CHECK(empty_fu.final == "S.");
    }

    TEST_CASE("waterfall assembles summary and follow-up") {
        Fixture f;
        RunConfig cfg;
        cfg.mode = Mode::waterfall;
        ScriptedBackend summariser({{"Guests liked the breakfast."}});
        ScriptedBackend responder({{" Would you like to book?"}});
        auto k = resolve_refs(f.kb, f.inst[0].label->refs);
        auto w = run_waterfall(f.inst[0], k, summariser, responder, cfg);
        CHECK(w.response == "Guests liked the breakfast. Would you like to book?");
        CHECK(w.requests == 2);
        CHECK_FALSE(w.degraded);
        REQUIRE(responder.seen.size() == 1);
        CHECK(render(responder.seen[0].bundle).find("(1) summary:\nGuests liked the breakfast.\n(2) follow-up:") !=
              std::string::npos);
        CHECK(summariser.seen[0].model == cfg.summariser_model);
        CHECK(responder.seen[0].model == cfg.responder_model);
    }

    TEST_CASE("waterfall falls back to the raw knowledge on an empty summary") {
        Fixture f;
        RunConfig cfg;
        cfg.mode = Mode::waterfall;
        ScriptedBackend summariser({{"  \n "}});
        ScriptedBackend responder({});
        auto k = resolve_refs(f.kb, f.inst[0].label->refs);
        auto w = run_waterfall(f.inst[0], k, summariser, responder, cfg);
        CHECK(w.degraded);
        CHECK(w.requests == 1);
        CHECK(responder.seen.empty());
        CHECK(w.response.find(k.front().text) == 0);
    }

    TEST_CASE("generation counts truncations and isolates failures") {
        Fixture f;
        auto sel = selections_from_labels(f.inst);
        // mark two seeking instances for truncation and one for failure
        std::vector<std::size_t> seeking;
        for (const auto& i : f.inst)
            if (i.label->target) seeking.push_back(i.id);
        f.inst[seeking[1]].turns.back().text += " TRUNC";
        f.inst[seeking[4]].turns.back().text += " TRUNC";
        f.inst[seeking[6]].turns.back().text += " FAILME";
        MarkerBackend b;
        for (int conc : {1, 4}) {
            RunConfig cfg;
            cfg.mode = Mode::plain_chat;
            cfg.concurrency = conc;
            auto r = run_generation(f.inst, f.kb, sel, b, nullptr, cfg);
            CHECK(r.stats.instances == 20);
            CHECK(r.stats.seeking == 14);
            CHECK(r.stats.requests == 13);
            CHECK(r.stats.truncated_count == 2);
            REQUIRE(r.stats.failures.size() == 1);
            CHECK(r.stats.failures[0].id == seeking[6]);
            CHECK(r.predictions[seeking[1]].truncated);
            CHECK(r.predictions[seeking[6]].response.empty());
            CHECK(r.predictions[seeking[0]].response == "Answer. Anything else?");
            for (std::size_t i = 0; i < 20; ++i) CHECK(r.predictions[i].id == i);
            CHECK(to_json(r.stats)["failed"] == 1);
        }
    }

    TEST_CASE("unknown reference fails before any request") {
        Fixture f;
        auto sel = selections_from_labels(f.inst);
        for (auto& s : sel)
            if (s.target) {
                s.refs[0].entity_id = "999";
                break;
            }
        ScriptedBackend b({});
        CHECK_THROWS_AS(run_generation(f.inst, f.kb, sel, b, nullptr, RunConfig{}), ResolutionError);
        CHECK(b.seen.empty());
        CHECK_THROWS_AS(selections_from_predictions({}, 3), ValidationError);
    }

    TEST_CASE("cot mode keeps only the final part") {
        Fixture f;
        auto sel = selections_from_labels(f.inst);
        MockBackend mock;
        RunConfig cfg;
        cfg.mode = Mode::cot;
        auto r = run_generation(f.inst, f.kb, sel, mock, nullptr, cfg);
        for (const auto& p : r.predictions) {
            if (!p.target) continue;
            CHECK(p.response.find("(3)") == std::string::npos);
            CHECK(split_response(p.response).question == std::string(kMostFrequentQuestion));
        }
    }

    TEST_CASE("append MFQ post-processor") {
        const std::string mfq(kMostFrequentQuestion);
        std::vector<Prediction> preds{target(0, "They do.  "), target(1, "Yes. Shall I book?"), target(2, ""),
                                      Prediction{3, false, {}, "", false}};
        auto out = postprocess_append_mfq(preds, mfq);
        CHECK(out[0].response == "They do. " + mfq);
        CHECK(out[1].response == "Yes. Shall I book?");
        CHECK(out[2].response == mfq);
        CHECK(out[3] == preds[3]);
        CHECK(postprocess_append_mfq(out, mfq) == out);
        CHECK_THROWS_AS(postprocess_append_mfq(preds, "Not a question."), ValidationError);
        CHECK_THROWS_AS(postprocess_append_mfq(preds, "Two? Questions?"), ValidationError);
    }

    TEST_CASE("strip post-processor removes stacked questions") {
        std::vector<Prediction> preds{target(0, "They do. Anything else? Shall I book?"), target(1, "Plain."),
                                      target(2, "Only a question?")};
        auto out = postprocess_strip_questions(preds);
        CHECK(out[0].response == "They do.");
        CHECK(out[1].response == "Plain.");
        CHECK(out[2].response == "");
        CHECK(postprocess_strip_questions(out) == out);
    }

    TEST_CASE("post-processor algebra on random responses") {
        std::mt19937 rng(5);
        const std::vector<std::string> parts{"Breakfast is good.", "Rooms are big!", "Want more?", "Parking costs extra.",
                                             "Shall I book?", "Ok."};
        std::uniform_int_distribution<std::size_t> pick(0, parts.size() - 1), len(0, 4);
        std::vector<Prediction> preds;
        for (std::size_t i = 0; i < 300; ++i) {
            std::vector<std::string> s;
            for (auto n = len(rng); n > 0; --n) s.push_back(parts[pick(rng)]);
            preds.push_back(target(i, text::join(s, " ")));
        }
        const std::string mfq(kMostFrequentQuestion);
        auto appended = postprocess_append_mfq(preds, mfq);
        auto stripped = postprocess_strip_questions(preds);
        for (std::size_t i = 0; i < preds.size(); ++i) {
            CHECK(split_response(appended[i].response).question.has_value());
            CHECK_FALSE(split_response(stripped[i].response).question.has_value());
            if (!split_response(preds[i].response).question)
                CHECK(postprocess_strip_questions({appended[i]})[0].response == preds[i].response);
        }
        CHECK(postprocess_append_mfq(appended, mfq) == appended);
        CHECK(postprocess_strip_questions(stripped) == stripped);
        // stripping then appending always ends in exactly the MFQ
        for (const auto& p : postprocess_append_mfq(stripped, mfq)) CHECK(split_response(p.response).question == mfq);
    }

    TEST_CASE("preview prompts per mode") {
        Fixture f;
        auto k = resolve_refs(f.kb, f.inst[0].label->refs);
        RunConfig cfg;
        cfg.mode = Mode::plain_completion;
        CHECK(preview_prompts(f.inst[0], k, cfg)[0].kind == PromptKind::completion);
        cfg.mode = Mode::cot;
        CHECK(preview_prompts(f.inst[0], k, cfg)[0].max_tokens == 2 * kDefaultMaxTokens);
        cfg.mode = Mode::waterfall;
        CHECK(render(preview_prompts(f.inst[0], k, cfg)[0]).rfind("Summarize the following", 0) == 0);
        cfg.concurrency = 0;
        CHECK_THROWS_AS(cfg.validate(), ValidationError);
    }
}
