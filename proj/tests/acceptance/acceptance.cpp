// Acceptance runner: one PASS/FAIL/SKIP line per criterion, exit status 1
// when anything fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "common/oracles.hpp"
#include "common/test_util.hpp"
#include "sktod/analysis.hpp"
#include "sktod/augment.hpp"
#include "sktod/cli.hpp"
#include "sktod/metrics.hpp"
#include "sktod/pipeline.hpp"
#include "sktod/prompting.hpp"
#include "sktod/sentiment.hpp"
#include "sktod/text.hpp"

using namespace sktod;
using Clock = std::chrono::steady_clock;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
    Verdict verdict = Verdict::pass;
    std::string detail;
};

// Collects the first few failed checks of a criterion.
class Checker {
public:
    void check(bool ok, const std::string& what) {
        if (ok) return;
        if (failures_++ < 5) notes_ += (notes_.empty() ? "" : "; ") + what;
    }
    Outcome outcome(std::string pass_detail) const {
        if (failures_ == 0) return {Verdict::pass, std::move(pass_detail)};
        return {Verdict::fail, std::to_string(failures_) + " failed: " + notes_};
    }

private:
    std::size_t failures_ = 0;
    std::string notes_;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
    std::ostringstream o;
    o.precision(prec);
    o << std::fixed << v;
    return o.str();
}

// --- 1 ---------------------------------------------------------------------------

Outcome rouge_oracle() {
    Checker c;
    const auto t0 = Clock::now();
    std::mt19937 rng(20230601);
    std::uniform_int_distribution<int> len(0, 8), word(0, 5);
    const Tokens vocab{"the", "room", "was", "clean", "and", "quiet"};
    for (int trial = 0; trial < 200; ++trial) {
        Tokens x, y;
        for (int i = len(rng); i > 0; --i) x.push_back(vocab[word(rng)]);
        for (int i = len(rng); i > 0; --i) y.push_back(vocab[word(rng)]);
        const auto id = "#" + std::to_string(trial);
        for (int n = 1; n <= 2; ++n) {
            const auto got = rouge_n(x, y, n);
            const auto want = oracle::rouge_n(x, y, n);
            c.check(std::abs(got.precision - want.p) <= 1e-12 && std::abs(got.recall - want.r) <= 1e-12 &&
                        std::abs(got.f1 - want.f) <= 1e-12,
                    "rouge-" + std::to_string(n) + " " + id);
        }
        const auto got = rouge_l(x, y);
        const auto want = oracle::rouge_l(x, y);
        c.check(std::abs(got.precision - want.p) <= 1e-12 && std::abs(got.recall - want.r) <= 1e-12 &&
                    std::abs(got.f1 - want.f) <= 1e-12,
                "rouge-l " + id);
    }
    const double s = seconds_since(t0);
    c.check(s < 5.0, "took " + fmt(s, 2) + "s");
    return c.outcome("200 pairs, " + fmt(s, 3) + "s");
}

// --- 2 ---------------------------------------------------------------------------

Outcome bleu_properties() {
    Checker c;
    // identity holds once every n-gram order up to 4 exists
    for (const char* s : {"the room was clean .", "yes , it does .", "breakfast was great and the staff were kind"}) {
        if (tokenize(s).size() >= 4) c.check(bleu(s, s) == 1.0, std::string("identity on \"") + s + "\"");
    }
    std::mt19937 rng(2);
    std::uniform_int_distribution<int> len(4, 20), word(0, 9);
    for (int trial = 0; trial < 100; ++trial) {
        Tokens t;
        for (int i = len(rng); i > 0; --i) t.push_back("w" + std::to_string(word(rng)));
        c.check(bleu(t, t) == 1.0, "identity on random #" + std::to_string(trial));
    }
    const double zero = bleu("alpha beta gamma delta", "one two three four");
    c.check(zero <= 1e-6, "zero overlap gave " + std::to_string(zero));
    // (1/3 * eps/2 * eps/1 * eps/1)^(1/4), eps = 1e-9; brevity penalty 1
    const double hand = 1.1362193664675001e-07;
    const double got = bleu("the the the", "the cat sat");
    c.check(got == hand, "clipped fixture " + std::to_string(got));
    return c.outcome("identity 1.0, zero-overlap " + std::to_string(zero) + ", clipped fixture exact");
}

// --- 3 ---------------------------------------------------------------------------

Outcome pearson_oracle() {
    Checker c;
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> len(2, 60);
    std::uniform_real_distribution<double> real(-100.0, 100.0);
    std::uniform_int_distribution<int> integer(-1000, 1000);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = len(rng);
        std::vector<double> x(n), y(n);
        for (auto& v : x) v = real(rng);
        for (auto& v : y) v = real(rng);
        const double r = pearson(x, y);
        c.check(std::abs(r - oracle::pearson(x, y)) <= 1e-12, "oracle #" + std::to_string(trial));
    }
    // rational scalings and integer shifts of integer data
    const std::vector<double> scales{2.0, 0.5, 4.0, 0.25, -2.0, 8.0, -0.125};
    for (int trial = 0; trial < 100; ++trial) {
        const int n = len(rng);
        std::vector<double> x(n), y(n);
        for (auto& v : x) v = integer(rng);
        for (auto& v : y) v = integer(rng);
        const double r = pearson(x, y);
        for (double a : scales) {
            const double b = integer(rng);
            std::vector<double> ax(x);
            for (auto& v : ax) v = a * v + b;
            c.check(pearson(ax, y) == (a > 0 ? r : -r), "affine a=" + std::to_string(a) + " #" + std::to_string(trial));
        }
    }
    return c.outcome("100 oracle vectors within 1e-12, 700 exact affine checks");
}

// --- 4 ---------------------------------------------------------------------------

Outcome postprocess_algebra() {
    Checker c;
    std::mt19937 rng(4242);
    const std::vector<std::string> statements{"The breakfast is good.", "Rooms are spacious!", "Parking costs extra.",
                                              "Guests liked the staff.", "Wifi is free."};
    const std::vector<std::string> questions{"Anything else?", "Shall I book it?", "Would you like to know more?"};
    std::uniform_int_distribution<std::size_t> ns(0, 3), pick_s(0, statements.size() - 1),
        pick_q(0, questions.size() - 1), nq(0, 2);
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < 1000; ++i) {
        std::vector<std::string> parts;
        for (auto k = ns(rng); k > 0; --k) parts.push_back(statements[pick_s(rng)]);
        for (auto k = nq(rng); k > 0; --k) parts.push_back(questions[pick_q(rng)]);
        Prediction p;
        p.id = i;
        p.target = i % 10 != 0;
        if (p.target) p.response = text::join(parts, " ");
        preds.push_back(std::move(p));
    }
    const std::string mfq(kMostFrequentQuestion);
    const auto appended = postprocess_append_mfq(preds, mfq);
    const auto stripped = postprocess_strip_questions(preds);
    c.check(postprocess_append_mfq(appended, mfq) == appended, "append not idempotent");
    c.check(postprocess_strip_questions(stripped) == stripped, "strip not idempotent");
    std::size_t question_free = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!preds[i].target || split_response(preds[i].response).question) continue;
        ++question_free;
        const auto round = postprocess_strip_questions({appended[i]});
        c.check(round[0] == preds[i], "strip(append(x)) != x at " + std::to_string(i));
    }
    c.check(question_free > 100, "too few question-free samples");
    return c.outcome("1000 responses, " + std::to_string(question_free) + " question-free round trips");
}

// --- 5 ---------------------------------------------------------------------------

Outcome golden_prompts() {
    Checker c;
    const auto kb = load_knowledge(fixture("knowledge.json"));
    const auto inst = load_dialogues(fixture("logs.json"), fixture("labels.json"));
    auto rev = [](const char* d, const char* s) { return KnowledgeRef{"hotel", "0", DocType::review, d, s}; };
    auto faq = [](const char* d) { return KnowledgeRef{"hotel", "0", DocType::faq, d, std::nullopt}; };
    const auto ktext = format_knowledge(resolve_refs(kb, {rev("0", "2"), rev("2", "2"), faq("2")}));
    const auto& turns = inst[0].turns;

    ReviewPromptOptions ro;
    ro.sentences_per_review = 4;
    IdMap<Faq> punt;
    punt["0"] = {"How long does a tour take?", "A standard tour lasts about 45 minutes."};
    punt["1"] = {"Can I book a private punt?", "Yes, private punts can be booked online."};

    const std::vector<std::pair<std::string, std::function<PromptBundle()>>> cases = {
        {"prompt1_reviews.txt", [&] { return build_review_prompt(*kb.find_entity("hotel", "0"), ro); }},
        {"prompt2_completion.txt", [&] { return build_completion_prompt(turns, ktext); }},
        {"prompt3_chat.txt", [&] { return build_chat_messages(turns, ktext); }},
        {"prompt4_cot.txt", [&] { return build_cot_messages(turns, ktext); }},
        {"prompt5_summarisation.txt",
         [&] {
             return build_summarisation_prompt(resolve_refs(kb, {faq("2"), faq("3")}),
                                               resolve_refs(kb, {rev("0", "2"), rev("2", "2"), rev("3", "3")}));
         }},
        {"prompt6_waterfall.txt",
         [&] {
             return build_waterfall_messages(turns, ktext,
                                             "Guests liked the breakfast options. Parking is available on site for a fee.");
         }},
        {"prompt_new_domain.txt", [&] { return build_domain_review_prompt("3", "CAMBRIDGE PUNT TOURS", punt); }},
    };
    for (const auto& [name, build] : cases) {
        try {
            c.check(render(build()) == read_file(fixture("golden/" + name)), name + " differs");
        } catch (const std::exception& e) {
            c.check(false, name + ": " + e.what());
        }
    }
    return c.outcome("7 golden files byte-equal");
}

// --- 6 ---------------------------------------------------------------------------

int cli_run(std::vector<std::string> args, std::string* err_out = nullptr) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (err_out) *err_out = err.str();
    return code;
}

Outcome determinism() {
    Checker c;
    TempDir tmp;
    const auto cassette = (tmp / "cassette.jsonl").string();
    const std::vector<std::string> base{"generate",         "--knowledge", fixture("knowledge.json").string(),
                                        "--logs",           fixture("logs.json").string(),
                                        "--labels",         fixture("labels.json").string(),
                                        "--mode",           "waterfall",
                                        "--concurrency",    "4"};
    auto with = [&](std::vector<std::string> extra) {
        auto a = base;
        a.insert(a.end(), extra.begin(), extra.end());
        return a;
    };
    std::string err;
    c.check(cli_run(with({"--backend", "record:" + cassette, "--record-from", "mock", "--out",
                          (tmp / "rec.json").string()}),
                    &err) == 0,
            "record run failed: " + err);

    const auto t0 = Clock::now();
    c.check(cli_run(with({"--backend", "replay:" + cassette, "--out", (tmp / "a.json").string()}), &err) == 0,
            "replay 1 failed: " + err);
    const double s = seconds_since(t0);
    c.check(cli_run(with({"--backend", "replay:" + cassette, "--out", (tmp / "b.json").string()}), &err) == 0,
            "replay 2 failed: " + err);
    const auto a = read_file(tmp / "a.json");
    c.check(!a.empty() && a == read_file(tmp / "b.json"), "replayed prediction files differ");
    c.check(a == read_file(tmp / "rec.json"), "replay differs from the recorded run");
    c.check(load_predictions(tmp / "a.json").size() == 20, "expected 20 predictions");
    c.check(s < 2.0, "20-instance replay took " + fmt(s, 2) + "s");
    return c.outcome("byte-identical replays, 20 instances in " + fmt(s, 3) + "s");
}

// --- 7 ---------------------------------------------------------------------------

// 450 seeking + 50 non-seeking instances. Item counts are 1 or 3 and
// knowledge sentiment is +1 or -0.5, each minority value held by 30% of the
// seeking set, which puts exactly the minority values inside the bands
// (a two-valued feature lands in [mu+s, mu+2s] iff its share is in [0.2, 0.5]).
// Only the three planted instances carry both minority values.
Outcome few_shot_planted() {
    Checker c;
    const auto lex = SentimentLexicon::from_tsv("yay\t1\nboo\t-1\nfine\t0.5\nmeh\t-0.5\n");
    KnowledgeBase kb;
    auto& e = kb.domains["hotel"]["0"];
    e.name = "SYNTH";
    e.reviews["0"] = Review{"Couples", {{"0", "yay"}, {"1", "boo"}, {"2", "fine"}, {"3", "meh"}}};
    auto r = [](const char* s) { return KnowledgeRef{"hotel", "0", DocType::review, "0", s}; };
    const std::vector<KnowledgeRef> one_pos{r("0")}, one_neg{r("3")}, three_pos{r("0"), r("0"), r("0")},
        three_neg{r("1"), r("1"), r("2")};

    enum Kind { A, B, C, P, N };  // A: 1/+1, B: 3/+1, C: 1/-0.5, P: planted 3/-0.5, N: not seeking
    std::vector<Kind> kinds;
    kinds.insert(kinds.end(), 183, A);
    kinds.insert(kinds.end(), 132, B);
    kinds.insert(kinds.end(), 132, C);
    kinds.insert(kinds.end(), 50, N);
    std::mt19937 rng(7);
    std::shuffle(kinds.begin(), kinds.end(), rng);
    // planted ids: one with a question, two without
    const std::vector<std::size_t> planted{57, 248, 431};
    for (auto id : planted) kinds.insert(kinds.begin() + static_cast<long>(id), P);

    std::vector<DialogueInstance> train;
    std::uniform_int_distribution<int> coin(0, 1);
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        DialogueInstance d;
        d.id = i;
        d.turns = {{Speaker::user, "Is it any good?"}};
        Label l;
        l.target = kinds[i] != N;
        const bool q = kinds[i] == P ? i == planted[1] : coin(rng) == 1;
        switch (kinds[i]) {
        case A: l.refs = one_pos; break;
        case B: l.refs = three_pos; break;
        case C: l.refs = one_neg; break;
        case P: l.refs = three_neg; break;
        case N: break;
        }
        if (l.target) l.response = q ? "Guests say it is fine. Anything else?" : "Guests say it is fine.";
        d.label = l;
        train.push_back(std::move(d));
    }
    c.check(train.size() == 500, "fixture has " + std::to_string(train.size()) + " instances");

    try {
        const auto ex = select_few_shot(train, lex, kb, 3);
        std::vector<std::size_t> ids;
        std::size_t with_q = 0;
        for (const auto& x : ex) {
            ids.push_back(x.dialogue.id);
            with_q += split_response(x.response).question.has_value();
        }
        c.check(ids == planted, "selected ids differ from the planted ones");
        c.check(with_q == 1, std::to_string(with_q) + " question-bearing examples");
        std::reverse(train.begin(), train.end());
        std::vector<std::size_t> again;
        for (const auto& x : select_few_shot(train, lex, kb, 3)) again.push_back(x.dialogue.id);
        c.check(again == planted, "selection depends on training order");
    } catch (const std::exception& ex) {
        c.check(false, ex.what());
    }
    return c.outcome("planted ids 57, 248, 431 selected; 1 of 3 with a question");
}

// --- 8 ---------------------------------------------------------------------------

Outcome augment_parsing() {
    Checker c;
    auto aug = [](const char* n) { return read_file(fixture(std::string("augment/") + n)); };
    try {
        const auto p = parse_generated_reviews(aug("guest_house_continuation.txt"), 10);
        std::vector<std::string> ids, types;
        for (const auto& [id, rv] : p.reviews) {
            ids.push_back(id);
            types.push_back(rv.traveler_type);
        }
        c.check(ids == std::vector<std::string>{"10", "11", "12", "13", "14"}, "continuation ids");
        c.check(types == std::vector<std::string>{"Family travelers", "Group travelers", "Budget travelers",
                                                  "Luxury travelers", "Pet owners"},
                "continuation traveler types");
    } catch (const std::exception& e) {
        c.check(false, std::string("continuation: ") + e.what());
    }
    for (const char* name : {"malformed_trailing_comma.txt", "malformed_single_quotes.txt"}) {
        try {
            const auto p = parse_generated_reviews(aug(name), 10);
            c.check(p.reviews.size() == 2 && !p.repairs.empty(), std::string(name) + " not fully repaired");
        } catch (const std::exception& e) {
            c.check(false, std::string(name) + ": " + e.what());
        }
    }
    bool rejected = false;
    try {
        parse_generated_reviews(aug("malformed_truncated.txt"), 10);
    } catch (const AugmentParseError& e) {
        rejected = e.raw() == aug("malformed_truncated.txt");
    }
    c.check(rejected, "truncated output was not rejected with its raw text");
    return c.outcome("reviews 10-14 recovered; 2 malformed repaired, 1 rejected");
}

// --- 9 ---------------------------------------------------------------------------

std::optional<std::filesystem::path> env_path(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::filesystem::path(v);
}

std::vector<std::string> gold_responses(const std::vector<Label>& labels) {
    std::vector<std::string> out;
    for (const auto& l : labels)
        if (l.target) out.push_back(l.response);
    return out;
}

Outcome released_data_statistics() {
    const auto dir = env_path("DSTC11_DATA_DIR");
    if (!dir) return {Verdict::skip, "DSTC11_DATA_DIR not set"};
    Checker c;
    std::ostringstream info;
    try {
        std::vector<std::string> all;
        const std::vector<std::pair<std::string, double>> reference_char_means{{"train", 136.61}, {"val", 133.55}, {"test", 135.55}};
        for (const auto& [split, mean_chars] : reference_char_means) {
            const auto path = *dir / split / "labels.json";
            if (!std::filesystem::exists(path)) continue;
            auto responses = gold_responses(load_labels(path));
            const auto ls = length_stats(responses);
            info << split << " " << fmt(ls.avg_chars, 2) << " chars; ";
            c.check(std::abs(ls.avg_chars - mean_chars) <= 0.5, split + " mean chars " + fmt(ls.avg_chars, 2));
            all.insert(all.end(), responses.begin(), responses.end());
        }
        c.check(!all.empty(), "no labels.json under " + dir->string());
        const auto qs = question_stats(all, 5);
        const auto [mfq, n] = most_frequent_question(all);
        info << "question share " << fmt(100 * qs.pct_with_question, 2) << "%, unique " << qs.unique_count
             << ", singletons " << fmt(100 * qs.singleton_pct, 1) << "%, top-5 " << fmt(100 * qs.top_share(5), 1) << "%";
        c.check(std::abs(100 * qs.pct_with_question - 34.94) <= 0.1, "question share");
        c.check(mfq == kMostFrequentQuestion, "MFQ is \"" + mfq + "\"");
        c.check(qs.unique_count == 2522, "unique questions " + std::to_string(qs.unique_count));
        c.check(std::abs(100 * qs.singleton_pct - 79) <= 1, "singleton share");
        c.check(std::abs(100 * qs.top_share(5) - 42) <= 1, "top-5 share");
    } catch (const std::exception& e) {
        c.check(false, e.what());
    }
    auto o = c.outcome(info.str());
    if (o.verdict == Verdict::fail) o.detail += " [" + info.str() + "]";
    return o;
}

// --- 10 --------------------------------------------------------------------------

Outcome baseline_direction() {
    const auto dir = env_path("DSTC11_DATA_DIR");
    const auto preds_path = env_path("DSTC11_BASELINE_PREDS");
    const std::string scope =
        "absolute scores of fine-tuned and API systems and the 0.41/0.53/0.54 sentiment correlations are out of scope";
    if (!dir || !preds_path) return {Verdict::skip, scope + "; MFQ direction check needs DSTC11_DATA_DIR and DSTC11_BASELINE_PREDS"};
    Checker c;
    std::string detail;
    try {
        const auto val = load_dialogues(*dir / "val" / "logs.json", *dir / "val" / "labels.json");
        const auto train = load_labels(*dir / "train" / "labels.json");
        const auto mfq = most_frequent_question(gold_responses(train)).first;
        const auto base = load_predictions(*preds_path);
        const auto plus = postprocess_append_mfq(base, mfq);
        const auto a = evaluate_all(val, base);
        const auto b = evaluate_all(val, plus);
        detail = "METEOR " + fmt(a.generation.meteor) + " -> " + fmt(b.generation.meteor) + ", BLEU " +
                 fmt(a.generation.bleu) + " -> " + fmt(b.generation.bleu);
        c.check(b.generation.meteor > a.generation.meteor, "METEOR did not rise: " + detail);
        c.check(b.generation.bleu < a.generation.bleu, "BLEU did not fall: " + detail);
    } catch (const std::exception& e) {
        c.check(false, e.what());
    }
    return c.outcome(detail);
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"metric oracle suite (ROUGE)", rouge_oracle},
        {"BLEU properties", bleu_properties},
        {"Pearson oracle and affine invariance", pearson_oracle},
        {"post-processor algebra", postprocess_algebra},
        {"prompt golden files", golden_prompts},
        {"replay determinism and speed", determinism},
        {"few-shot selector", few_shot_planted},
        {"augment parsing", augment_parsing},
        {"released-data statistics", released_data_statistics},
        {"MFQ direction on baseline predictions", baseline_direction},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {Verdict::fail, std::string("uncaught: ") + e.what()};
        }
        const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
        failed += o.verdict == Verdict::fail;
        std::cout << "[" << tag << "] " << (i + 1) << ". " << criteria[i].first << ": " << o.detail << "\n";
    }
    std::cout << (failed == 0 ? "all criteria passed or skipped\n" : std::to_string(failed) + " criteria failed\n");
    return failed == 0 ? 0 : 1;
}
