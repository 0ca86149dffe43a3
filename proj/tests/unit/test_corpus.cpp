#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "sktod/corpus.hpp"
#include "sktod/errors.hpp"
#include "sktod/json_io.hpp"
#include "sktod/text.hpp"
#include "common/test_util.hpp"

using namespace sktod;

TEST_SUITE("text") {
    TEST_CASE("trim and whitespace normalisation") {
        CHECK(text::trim("  a b \n") == "a b");
        CHECK(text::trim("") == "");
        CHECK(text::normalize_whitespace(" a \t b\n\nc ") == "a b c");
    }

    TEST_CASE("sentence splitter keeps terminators") {
        auto s = text::split_sentences("They have wifi. Would you like to know more?");
        REQUIRE(s.size() == 2);
        CHECK(s[0] == "They have wifi.");
        CHECK(s[1] == "Would you like to know more?");
        CHECK(text::split_sentences("Wow!! Really?! ok").size() == 3);
        CHECK(text::split_sentences("Check-in is 3:30pm - 9:00pm.").size() == 1);
        CHECK(text::split_sentences("   ").empty());
        // no whitespace after the dot: not a boundary
        CHECK(text::split_sentences("Visit example.com today.").size() == 1);
    }

    TEST_CASE("utf8 length counts code points") {
        CHECK(text::utf8_length("abc") == 3);
        CHECK(text::utf8_length("caf\xc3\xa9") == 4);
        CHECK(text::utf8_length("") == 0);
    }
}

TEST_SUITE("corpus") {
    TEST_CASE("guest house knowledge loads with reviews 0-14 and 10 FAQs") {
        auto kb = load_knowledge(fixture("knowledge_guest_house.json"));
        const auto* e = kb.find_entity("hotel", "0");
        REQUIRE(e != nullptr);
        CHECK(e->name == "A AND B GUEST HOUSE");
        CHECK(e->reviews.size() == 15);
        CHECK(e->reviews.begin()->first == "0");
        CHECK(e->reviews.rbegin()->first == "14");
        CHECK(e->faqs.size() == 10);
        auto c = kb.counts();
        CHECK(c.entities == 1);
        CHECK(c.reviews == 15);
        CHECK(c.faqs == 10);
        CHECK(c.sentences == 64);
    }

    TEST_CASE("empty domains object gives an empty knowledge base") {
        auto kb = parse_knowledge(nlohmann::json::object());
        CHECK(kb.counts().entities == 0);
        auto kb2 = parse_knowledge(nlohmann::json::parse(R"({"hotel": {}})"));
        CHECK(kb2.counts().entities == 0);
    }

    TEST_CASE("knowledge invariants are enforced") {
        auto base = R"({"hotel": {"0": {"name": "X", "reviews": {"0": {"traveler_type": "Couples",
                       "sentences": {"0": "a", "2": "b"}}}, "faqs": {}}}})";
        CHECK_THROWS_AS(validate_knowledge(parse_knowledge(nlohmann::json::parse(base))), ValidationError);
        auto empty_type = R"({"hotel": {"0": {"name": "X", "reviews": {"0": {"traveler_type": " ",
                       "sentences": {"0": "a"}}}, "faqs": {}}}})";
        CHECK_THROWS_AS(validate_knowledge(parse_knowledge(nlohmann::json::parse(empty_type))), ValidationError);
        auto bad_id = R"({"hotel": {"x1": {"name": "X", "reviews": {}, "faqs": {}}}})";
        CHECK_THROWS_AS(parse_knowledge(nlohmann::json::parse(bad_id)), ParseError);
    }

    TEST_CASE("duplicate keys are rejected with a location") {
        try {
            parse_json_strict(R"({"a": 1, "a": 2})", "dup.json");
            FAIL("expected a ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("duplicate key") != std::string::npos);
        }
        try {
            parse_json_strict("{\n  \"a\": 1,\n  \"b\": }", "bad.json");
            FAIL("expected a ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("bad.json:3") != std::string::npos);
        }
    }

    TEST_CASE("resolve_ref gives sentences and question-answer pairs") {
        auto kb = load_knowledge(fixture("knowledge_guest_house.json"));
        KnowledgeRef r{"hotel", "0", DocType::review, "0", "0"};
        CHECK(resolve_ref(kb, r).text == "I was really happy with my recent stay at A and B Guest House.");
        CHECK(resolve_ref(kb, r).kind == DocType::review);
        KnowledgeRef f{"hotel", "0", DocType::faq, "1", std::nullopt};
        CHECK(resolve_ref(kb, f).text ==
              "Can I bring my pet to A and B Guest House? No, pets are not allowed at this property.");
        KnowledgeRef missing{"hotel", "999", DocType::review, "0", "0"};
        try {
            resolve_ref(kb, missing);
            FAIL("expected ResolutionError");
        } catch (const ResolutionError& e) {
            CHECK(std::string(e.what()).find("entity not found") != std::string::npos);
        }
        CHECK_THROWS_AS(resolve_ref(kb, {"taxi", "0", DocType::faq, "0", std::nullopt}), ResolutionError);
        CHECK_THROWS_AS(resolve_ref(kb, {"hotel", "0", DocType::review, "0", "9"}), ResolutionError);
    }

    TEST_CASE("every label ref in the dialogue fixture resolves") {
        auto kb = load_knowledge(fixture("knowledge.json"));
        auto inst = load_dialogues(fixture("logs.json"), fixture("labels.json"));
        std::size_t refs = 0;
        for (const auto& i : inst) {
            if (!i.label) continue;
            for (const auto& r : i.label->refs) {
                CHECK_NOTHROW(resolve_ref(kb, r));
                ++refs;
            }
        }
        CHECK(refs > 0);
    }

    TEST_CASE("dialogues load with and without labels") {
        TempDir tmp;
        write_text(tmp / "logs.json", R"([[{"speaker":"U","text":"hi"}],[{"speaker":"U","text":"a"},{"speaker":"S","text":"b"},{"speaker":"U","text":"c"}]])");
        write_text(tmp / "labels.json", R"([{"target": false}, {"target": true, "knowledge": [{"domain":"hotel","entity_id":0,"doc_type":"faq","doc_id":1}], "response": "No."}])");
        auto two = load_dialogues(tmp / "logs.json", tmp / "labels.json");
        REQUIRE(two.size() == 2);
        CHECK(two[1].label->target);
        CHECK(two[1].last_user_utterance() == "c");
        auto unlabeled = load_dialogues(tmp / "logs.json", std::nullopt);
        CHECK(unlabeled.size() == 2);
        CHECK_FALSE(unlabeled[0].label.has_value());

        write_text(tmp / "logs3.json", R"([[{"speaker":"U","text":"a"}],[{"speaker":"U","text":"b"}],[{"speaker":"U","text":"c"}]])");
        try {
            load_dialogues(tmp / "logs3.json", tmp / "labels.json");
            FAIL("expected a length mismatch");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("length mismatch") != std::string::npos);
        }
        write_text(tmp / "badturn.json", R"([[{"speaker":"X","text":"a"}]])");
        CHECK_THROWS_AS(load_logs(tmp / "badturn.json"), ParseError);
    }

    TEST_CASE("predictions round-trip and non-seeking entries stay minimal") {
        std::vector<Prediction> preds;
        for (std::size_t i = 0; i < 10; ++i) {
            Prediction p;
            p.id = i;
            p.target = i % 3 != 0;
            if (p.target) {
                p.refs = {{"hotel", std::to_string(i), DocType::review, "1", "2"},
                          {"restaurant", "3", DocType::faq, "0", std::nullopt}};
                p.response = "Response number " + std::to_string(i) + ".";
                p.truncated = i == 4;
            }
            preds.push_back(p);
        }
        TempDir tmp;
        write_predictions(preds, tmp / "preds.json");
        CHECK(load_predictions(tmp / "preds.json") == preds);
        auto j = predictions_to_json(preds);
        CHECK(j[0].dump() == R"({"target":false})");
        CHECK_THROWS_AS(write_predictions(preds, "/proc/definitely/not/writable.json"), IoError);
    }

    TEST_CASE("malformed prediction entry is reported by index") {
        auto doc = nlohmann::json::array();
        for (int i = 0; i < 10; ++i) doc.push_back({{"target", false}});
        doc[7] = {{"target", "yes"}};
        try {
            parse_predictions(doc);
            FAIL("expected a ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("7") != std::string::npos);
        }
    }

    TEST_CASE("merge appends reviews and renumbers collisions") {
        auto a = load_knowledge(fixture("knowledge_guest_house.json"));
        // base = reviews 0-9, extra = 10-14 -> 0-14
        KnowledgeBase base = a, extra;
        auto& be = base.domains["hotel"]["0"];
        auto& ee = extra.domains["hotel"]["0"];
        ee.name = be.name;
        for (int i = 10; i < 15; ++i) {
            ee.reviews[std::to_string(i)] = be.reviews.at(std::to_string(i));
            be.reviews.erase(std::to_string(i));
        }
        auto merged = merge_knowledge(base, extra);
        CHECK(merged == a);
        CHECK(merge_knowledge(base, KnowledgeBase{}) == base);

        // colliding id 3 -> next free id, content preserved
        KnowledgeBase clash;
        clash.domains["hotel"]["0"].name = be.name;
        Review r{"Pet owners", {{"0", "Dogs welcome."}}};
        clash.domains["hotel"]["0"].reviews["3"] = r;
        auto m2 = merge_knowledge(base, clash);
        const auto& reviews = m2.domains["hotel"]["0"].reviews;
        CHECK(reviews.at("3") == be.reviews.at("3"));
        CHECK(reviews.at("10") == r);
        std::multiset<std::string> before, after;
        for (const auto& [id, rv] : be.reviews)
            for (const auto& [s, t] : rv.sentences) before.insert(t);
        before.insert("Dogs welcome.");
        for (const auto& [id, rv] : reviews)
            for (const auto& [s, t] : rv.sentences) after.insert(t);
        CHECK(before == after);

        KnowledgeBase nameless;
        nameless.domains["attraction"]["5"].faqs["0"] = {"q?", "a."};
        CHECK_THROWS_AS(merge_knowledge(base, nameless), ValidationError);
    }

    TEST_CASE("knowledge save/load is stable") {
        auto kb = load_knowledge(fixture("knowledge.json"));
        TempDir tmp;
        save_knowledge(kb, tmp / "k.json");
        CHECK(load_knowledge(tmp / "k.json") == kb);
        CHECK(read_file(tmp / "k.json") == knowledge_to_json(kb).dump(2) + "\n");
    }
}
