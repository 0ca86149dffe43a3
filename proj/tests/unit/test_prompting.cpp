#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "common/test_util.hpp"
#include "sktod/analysis.hpp"
#include "sktod/augment.hpp"
#include "sktod/errors.hpp"
#include "sktod/prompting.hpp"

using namespace sktod;

namespace {

KnowledgeRef rev(const char* doc, const char* sent) { return {"hotel", "0", DocType::review, doc, sent}; }
KnowledgeRef faq(const char* doc) { return {"hotel", "0", DocType::faq, doc, std::nullopt}; }

struct GoldenInputs {
    KnowledgeBase kb = load_knowledge(fixture("knowledge.json"));
    std::vector<DialogueInstance> inst = load_dialogues(fixture("logs.json"), fixture("labels.json"));
    std::string knowledge = format_knowledge(resolve_refs(kb, {rev("0", "2"), rev("2", "2"), faq("2")}));
    const std::vector<Turn>& turns() const { return inst[0].turns; }
};

std::string golden(const char* name) { return read_file(fixture(std::string("golden/") + name)); }

}  // namespace

TEST_SUITE("prompting") {
    TEST_CASE("completion prompt golden") {
        GoldenInputs g;
        auto b = build_completion_prompt(g.turns(), g.knowledge);
        CHECK(b.kind == PromptKind::completion);
        CHECK(render(b) == golden("prompt2_completion.txt"));
    }

    TEST_CASE("chat prompt golden") {
        GoldenInputs g;
        auto b = build_chat_messages(g.turns(), g.knowledge);
        CHECK(render(b) == golden("prompt3_chat.txt"));
        REQUIRE(b.messages);
        CHECK(b.messages->front().role == Role::system);
        CHECK(b.messages->back().role == Role::user);
        auto bad = g.turns();
        bad.pop_back();
        CHECK_THROWS_AS(build_chat_messages(bad, g.knowledge), ValidationError);
    }

    TEST_CASE("chain-of-thought prompt golden") {
        GoldenInputs g;
        auto b = build_cot_messages(g.turns(), g.knowledge, {}, 256);
        CHECK(render(b) == golden("prompt4_cot.txt"));
        CHECK(b.max_tokens == 512);
    }

    TEST_CASE("few-shot examples become user/assistant pairs") {
        GoldenInputs g;
        FewShotExample ex{g.inst[0], g.knowledge, "Guests love it. Anything else?"};
        auto b = build_cot_messages(g.turns(), g.knowledge, {ex, ex});
        REQUIRE(b.messages);
        REQUIRE(b.messages->size() == 5);
        CHECK((*b.messages)[0].role == Role::user);
        CHECK((*b.messages)[1].role == Role::assistant);
        CHECK((*b.messages)[1].content.find("(2) follow-up: Anything else?") != std::string::npos);
        CHECK((*b.messages)[1].content.find("(3) final: Guests love it. Anything else?") != std::string::npos);
        CHECK(render(PromptBundle::chat({b.messages->back()})) == golden("prompt4_cot.txt"));
        CHECK_THROWS_AS(build_cot_messages(g.turns(), g.knowledge, {ex, ex, ex, ex}), ValidationError);
    }

    TEST_CASE("summarisation prompt golden") {
        GoldenInputs g;
        auto faqs = resolve_refs(g.kb, {faq("2"), faq("3")});
        auto reviews = resolve_refs(g.kb, {rev("0", "2"), rev("2", "2"), rev("3", "3")});
        CHECK(render(build_summarisation_prompt(faqs, reviews)) == golden("prompt5_summarisation.txt"));
    }

    TEST_CASE("waterfall prompt golden") {
        GoldenInputs g;
        auto b = build_waterfall_messages(g.turns(), g.knowledge,
                                          "  Guests liked the breakfast options. Parking is available on site for a fee.\n");
        CHECK(render(b) == golden("prompt6_waterfall.txt"));
        CHECK_THROWS_AS(build_waterfall_messages(g.turns(), g.knowledge, " \n"), ValidationError);
    }

    TEST_CASE("review and new-domain prompt goldens") {
        auto kb = load_knowledge(fixture("knowledge.json"));
        ReviewPromptOptions opts;
        opts.sentences_per_review = 4;
        auto b = build_review_prompt(*kb.find_entity("hotel", "0"), opts);
        CHECK(render(b) == golden("prompt1_reviews.txt"));
        CHECK(b.max_tokens == 1024);

        IdMap<Faq> faqs;
        faqs["0"] = {"How long does a tour take?", "A standard tour lasts about 45 minutes."};
        faqs["1"] = {"Can I book a private punt?", "Yes, private punts can be booked online."};
        CHECK(render(build_domain_review_prompt("3", "CAMBRIDGE PUNT TOURS", faqs)) == golden("prompt_new_domain.txt"));
        CHECK_THROWS_AS(build_domain_review_prompt("3", "X", {}), ValidationError);
    }

    TEST_CASE("bundle json round trip and validation") {
        auto c = PromptBundle::completion("hello", 12);
        CHECK(bundle_from_json(nlohmann::json::parse(to_json(c).dump())) == c);
        auto ch = PromptBundle::chat({{Role::system, "s"}, {Role::user, "u"}});
        CHECK(bundle_from_json(nlohmann::json::parse(to_json(ch).dump())) == ch);
        PromptBundle broken;
        broken.kind = PromptKind::chat;
        broken.text = "x";
        CHECK_THROWS_AS(broken.validate(), ValidationError);
        CHECK_THROWS_AS(PromptBundle::completion("x", 0).validate(), ValidationError);
    }
}

// --- few-shot selection -------------------------------------------------------

namespace {

struct Synthetic {
    KnowledgeBase kb;
    std::vector<DialogueInstance> train;
    SentimentLexicon lex = SentimentLexicon::from_tsv("yay\t1\nboo\t-1\n");
};

// 500 instances; item count and knowledge sentiment vary with the id.
Synthetic make_synthetic() {
    Synthetic s;
    auto& e = s.kb.domains["hotel"]["0"];
    e.name = "SYNTH";
    e.reviews["0"] = Review{"Couples", {{"0", "yay"}, {"1", "boo"}, {"2", "meh"}}};
    for (std::size_t i = 0; i < 500; ++i) {
        DialogueInstance d;
        d.id = i;
        d.turns = {{Speaker::user, "Is it nice?"}};
        Label l;
        l.target = i % 7 != 0;
        if (l.target) {
            const std::size_t n = 1 + (i * 7) % 6;
            for (std::size_t j = 0; j < n; ++j) {
                auto sid = std::to_string((i / 3 + j * (i % 4)) % 3);
                l.refs.push_back({"hotel", "0", DocType::review, "0", sid});
            }
            l.response = (i * 13) % 5 < 2 ? "It is fine. Anything else?" : "It is fine.";
        }
        d.label = l;
        s.train.push_back(d);
    }
    return s;
}

// Independent restatement of the selection rule.
std::vector<std::size_t> expected_ids(const Synthetic& s, std::size_t k) {
    std::vector<double> items, sent;
    std::vector<const DialogueInstance*> seek;
    for (const auto& d : s.train) {
        if (!d.label->target) continue;
        seek.push_back(&d);
        items.push_back(static_cast<double>(d.label->refs.size()));
        double sum = 0;
        for (const auto& r : d.label->refs) sum += score_text(s.lex, resolve_ref(s.kb, r).text);
        sent.push_back(sum / d.label->refs.size());
    }
    auto ms = [](const std::vector<double>& v) {
        long double m = 0;
        for (double x : v) m += x;
        m /= v.size();
        long double ss = 0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair<double, double>(static_cast<double>(m), static_cast<double>(std::sqrt(ss / v.size())));
    };
    auto [im, is] = ms(items);
    auto [sm, ss] = ms(sent);
    std::vector<std::size_t> q, plain;
    for (std::size_t i = 0; i < seek.size(); ++i) {
        if (items[i] < im + is - 1e-9 || items[i] > im + 2 * is + 1e-9) continue;
        if (sent[i] < sm - 2 * ss - 1e-9 || sent[i] > sm - ss + 1e-9) continue;
        (split_response(seek[i]->label->response).question ? q : plain).push_back(seek[i]->id);
    }
    std::size_t nq = static_cast<std::size_t>(std::lround(k / 3.0));
    std::vector<std::size_t> out(q.begin(), q.begin() + nq);
    out.insert(out.end(), plain.begin(), plain.begin() + (k - nq));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> ids_of(const std::vector<FewShotExample>& ex) {
    std::vector<std::size_t> out;
    for (const auto& e : ex) out.push_back(e.dialogue.id);
    return out;
}

}  // namespace

TEST_SUITE("prompting") {
    TEST_CASE("few-shot selector picks in-band examples with the question quota") {
        auto s = make_synthetic();
        auto bands = few_shot_bands(s.train, s.lex, s.kb);
        for (std::size_t k : {1u, 2u, 3u, 6u}) {
            auto ex = select_few_shot(s.train, s.lex, s.kb, k);
            REQUIRE(ex.size() == k);
            CHECK(ids_of(ex) == expected_ids(s, k));
            std::size_t with_q = 0;
            for (const auto& e : ex) {
                const double items = static_cast<double>(e.dialogue.label->refs.size());
                CHECK(items >= bands.items_lo());
                CHECK(items <= bands.items_hi());
                with_q += split_response(e.response).question.has_value();
                CHECK(e.knowledge_text.rfind("Review: ", 0) == 0);
            }
            CHECK(with_q == static_cast<std::size_t>(std::lround(k / 3.0)));
        }
    }

    TEST_CASE("few-shot selection ignores training order") {
        auto s = make_synthetic();
        auto before = ids_of(select_few_shot(s.train, s.lex, s.kb, 3));
        std::mt19937 rng(3);
        std::shuffle(s.train.begin(), s.train.end(), rng);
        CHECK(ids_of(select_few_shot(s.train, s.lex, s.kb, 3)) == before);
    }

    TEST_CASE("few-shot selection reports counts when it cannot fill the quota") {
        auto s = make_synthetic();
        for (auto& d : s.train)
            if (d.label->target) d.label->response = "No question here.";
        try {
            select_few_shot(s.train, s.lex, s.kb, 3);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            std::string msg = e.what();
            CHECK(msg.find("seeking") != std::string::npos);
            CHECK(msg.find("0 in both with a question") != std::string::npos);
        }
        CHECK(select_few_shot(s.train, s.lex, s.kb, 0).empty());
    }
}
