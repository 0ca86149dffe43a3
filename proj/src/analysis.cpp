#include "sktod/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "sktod/errors.hpp"
#include "sktod/text.hpp"

namespace sktod {

SplitResponse split_response(std::string_view raw) {
    const auto normalized = text::normalize_whitespace(raw);
    SplitResponse out;
    if (normalized.empty()) return out;
    const auto sentences = text::split_sentences(normalized);
    if (sentences.empty() || sentences.back().back() != '?') {
        out.summary = normalized;
        return out;
    }
    const auto& last = sentences.back();
    out.question = last;
    out.summary = text::trim(std::string_view(normalized).substr(0, normalized.size() - last.size()));
    return out;
}

namespace {

std::map<std::string, std::size_t> count_questions(const std::vector<std::string>& responses, std::size_t* with) {
    std::map<std::string, std::size_t> counts;
    std::size_t n = 0;
    for (const auto& r : responses) {
        auto split = split_response(r);
        if (!split.question) continue;
        ++counts[*split.question];
        ++n;
    }
    if (with) *with = n;
    return counts;
}

std::vector<std::pair<std::string, std::size_t>> ranked(const std::map<std::string, std::size_t>& counts) {
    std::vector<std::pair<std::string, std::size_t>> v(counts.begin(), counts.end());
    // std::map iteration is already lexicographic; a stable sort keeps that as the tie-break.
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return v;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v, double mean) {
    if (v.empty()) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

std::pair<std::string, std::size_t> most_frequent_question(const std::vector<std::string>& responses) {
    const auto counts = count_questions(responses, nullptr);
    if (counts.empty()) throw ValidationError("most_frequent_question: no response contains a question");
    return ranked(counts).front();
}

double QuestionStats::top_share(std::size_t n) const {
    if (with_question == 0) return 0.0;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < std::min(n, top_k.size()); ++i) covered += top_k[i].second;
    return static_cast<double>(covered) / static_cast<double>(with_question);
}

QuestionStats question_stats(const std::vector<std::string>& responses, std::size_t k) {
    QuestionStats s;
    s.responses = responses.size();
    const auto counts = count_questions(responses, &s.with_question);
    s.unique_count = counts.size();
    for (const auto& [q, c] : counts) {
        (void)q;
        if (c == 1) ++s.singleton_count;
    }
    if (s.responses > 0) s.pct_with_question = static_cast<double>(s.with_question) / static_cast<double>(s.responses);
    if (s.unique_count > 0)
        s.singleton_pct = static_cast<double>(s.singleton_count) / static_cast<double>(s.unique_count);
    auto all = ranked(counts);
    if (all.size() > k) all.resize(k);
    s.top_k = std::move(all);
    return s;
}

LengthStats length_stats(const std::vector<std::string>& responses) {
    LengthStats s;
    s.count = responses.size();
    std::vector<double> sentences, chars;
    for (const auto& r : responses) {
        sentences.push_back(static_cast<double>(text::split_sentences(r).size()));
        chars.push_back(static_cast<double>(text::utf8_length(r)));
    }
    s.avg_sentences = mean_of(sentences);
    s.std_sentences = pop_std(sentences, s.avg_sentences);
    s.avg_chars = mean_of(chars);
    s.std_chars = pop_std(chars, s.avg_chars);
    return s;
}

std::string_view to_string(DialogueAct act) {
    switch (act) {
    case DialogueAct::yes_no_question: return "yes_no_question";
    case DialogueAct::open_question_opinion: return "open_question_opinion";
    case DialogueAct::open_question_factual: return "open_question_factual";
    case DialogueAct::statement: return "statement";
    case DialogueAct::command: return "command";
    case DialogueAct::opinion: return "opinion";
    case DialogueAct::pos_answer: return "pos_answer";
    case DialogueAct::neg_answer: return "neg_answer";
    case DialogueAct::complaint: return "complaint";
    case DialogueAct::comment: return "comment";
    case DialogueAct::nonsense: return "nonsense";
    }
    return "statement";
}

namespace {

using WordSet = std::set<std::string_view>;

const WordSet kWhWords = {"what", "which", "who", "whom", "whose", "when", "where", "why", "how"};
const WordSet kOpinionCues = {"think",  "thoughts", "like",    "recommend", "recommended", "opinion",
                              "opinions", "good",   "best",    "better",    "worth",       "feel",
                              "say",    "said",     "review",  "reviews",   "rate",        "rated",
                              "rating", "experience", "impression", "impressions", "nice", "great"};
const WordSet kAuxiliaries = {"do",      "does",     "did",     "is",       "are",    "was",      "were",
                              "can",     "could",    "will",    "would",    "should", "shall",    "may",
                              "might",   "must",     "have",    "has",      "had",    "am",       "don't",
                              "doesn't", "didn't",   "isn't",   "aren't",   "wasn't", "weren't",  "can't",
                              "couldn't", "won't",   "wouldn't", "shouldn't", "hasn't", "haven't"};
const WordSet kDiscourse = {"and", "so", "also", "but", "well", "oh", "ok", "okay", "hmm", "hi",
                            "hello", "hey", "alright", "um", "actually", "then", "great", "thanks"};
const WordSet kImperatives = {"book", "reserve", "tell", "give",    "find",    "show", "make",
                              "let",  "check",   "get",  "send",    "help",    "list", "recommend",
                              "describe", "confirm", "cancel", "search", "look", "suggest"};
const WordSet kFirstPerson = {"i", "i'm", "i've", "i'd", "i'll", "me", "my", "we", "we're", "we've", "our", "us"};
const WordSet kEvaluativeVerbs = {"think", "feel", "believe", "love",  "like",  "hate",    "prefer",  "enjoy",
                                  "dislike", "guess", "hope",  "worry", "worried", "afraid", "wish", "care"};
const WordSet kBackchannel = {"thanks", "thank", "you",  "wow",     "cool", "nice",   "interesting", "great",
                              "awesome", "perfect", "good", "to",   "know", "oh",     "ah",          "i",
                              "see",    "alright", "got",  "it",    "that's", "amazing", "very",     "much",
                              "so",     "excellent", "fine"};

const std::set<std::string> kPositiveAnswers = {"yes",  "yeah",  "yep",   "yup",   "sure",  "ok",
                                                "okay", "yes please", "sure thing", "of course", "absolutely",
                                                "definitely", "sounds good", "that would be great"};
const std::set<std::string> kNegativeAnswers = {"no", "nope", "nah", "no thanks", "no thank you", "not really",
                                                "not now", "no need"};

bool in(const WordSet& set, const std::string& w) { return set.contains(w); }

}  // namespace

DialogueAct tag_dialogue_act(std::string_view utterance, const SentimentLexicon& lex) {
    const auto trimmed = text::trim(utterance);
    const auto tokens = sentiment_tokens(trimmed);
    const bool has_letter = std::any_of(trimmed.begin(), trimmed.end(), [](char c) {
        return std::isalpha(static_cast<unsigned char>(c)) != 0;
    });
    if (tokens.empty() || !has_letter) return DialogueAct::nonsense;

    std::size_t head = 0;
    while (head + 1 < tokens.size() && in(kDiscourse, tokens[head])) ++head;
    const auto& first = tokens[head];

    if (in(kWhWords, first)) {
        const bool opinion = std::any_of(tokens.begin(), tokens.end(), [](const auto& t) { return in(kOpinionCues, t); });
        return opinion ? DialogueAct::open_question_opinion : DialogueAct::open_question_factual;
    }
    if (trimmed.back() == '?') return DialogueAct::yes_no_question;

    const auto whole = text::join(tokens, " ");
    if (kPositiveAnswers.contains(whole)) return DialogueAct::pos_answer;
    if (kNegativeAnswers.contains(whole)) return DialogueAct::neg_answer;
    if (std::all_of(tokens.begin(), tokens.end(), [](const auto& t) { return in(kBackchannel, t); }))
        return DialogueAct::comment;

    std::size_t verb = head;
    if (tokens[verb] == "please" && verb + 1 < tokens.size()) ++verb;
    if (in(kImperatives, tokens[verb])) return DialogueAct::command;

    const bool first_person = std::any_of(tokens.begin(), tokens.end(), [](const auto& t) { return in(kFirstPerson, t); });
    if (first_person) {
        bool evaluative = std::any_of(tokens.begin(), tokens.end(), [](const auto& t) { return in(kEvaluativeVerbs, t); });
        if (!evaluative) {
            evaluative = std::any_of(tokens.begin(), tokens.end(), [&lex](const auto& t) {
                const double* v = lex.valence(t);
                return v != nullptr && std::abs(*v) >= 0.5;
            });
        }
        if (evaluative) return score_text(lex, trimmed) < 0.0 ? DialogueAct::complaint : DialogueAct::opinion;
    }
    return DialogueAct::statement;
}

std::vector<ActRow> per_act_report(const std::vector<DialogueInstance>& instances,
                                   const std::vector<Prediction>& predictions, const SentimentLexicon& lex) {
    if (instances.size() != predictions.size())
        throw ValidationError("per_act_report: " + std::to_string(instances.size()) + " instances vs " +
                              std::to_string(predictions.size()) + " predictions");
    std::map<DialogueAct, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        if (!inst.label || !inst.label->target) continue;
        groups[tag_dialogue_act(inst.last_user_utterance(), lex)].push_back(i);
    }
    std::vector<ActRow> rows;
    for (const auto& [act, idx] : groups) {
        ActRow row;
        row.act = act;
        row.freq = idx.size();
        std::vector<double> lengths;
        for (std::size_t i : idx) {
            if (predictions[i].target) lengths.push_back(static_cast<double>(text::utf8_length(predictions[i].response)));
        }
        row.avg_response_chars = mean_of(lengths);
        row.scores = mean_generation_scores(instances, predictions, idx);
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ActRow& a, const ActRow& b) { return a.freq > b.freq; });
    return rows;
}

CorrelationMatrix feature_correlations(const std::vector<DialogueInstance>& instances,
                                       const std::vector<Prediction>& predictions) {
    if (instances.size() != predictions.size())
        throw ValidationError("feature_correlations: " + std::to_string(instances.size()) + " instances vs " +
                              std::to_string(predictions.size()) + " predictions");
    std::vector<std::vector<double>> columns(kFeatureNames.size());
    std::size_t samples = 0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        const auto& pred = predictions[i];
        if (!inst.label || !inst.label->target || !pred.target) continue;
        ++samples;
        columns[0].push_back(static_cast<double>(inst.turns.size()));
        columns[1].push_back(static_cast<double>(inst.label->refs.size()));
        columns[2].push_back(static_cast<double>(text::utf8_length(inst.label->response)));
        columns[3].push_back(static_cast<double>(text::split_sentences(inst.label->response).size()));
        columns[4].push_back(static_cast<double>(text::utf8_length(pred.response)));
        columns[5].push_back(static_cast<double>(text::split_sentences(pred.response).size()));
    }
    CorrelationMatrix m;
    m.samples = samples;
    for (auto name : kFeatureNames) m.labels.emplace_back(name);
    m.values.assign(kFeatureNames.size(), std::vector<std::optional<double>>(kFeatureNames.size()));
    for (std::size_t a = 0; a < columns.size(); ++a) {
        for (std::size_t b = 0; b < columns.size(); ++b) {
            try {
                m.values[a][b] = pearson(columns[a], columns[b]);
            } catch (const ValidationError&) {
                m.values[a][b] = std::nullopt;
            }
        }
    }
    return m;
}

Distribution describe(std::vector<double> values) {
    Distribution d;
    d.count = values.size();
    if (values.empty()) return d;
    std::sort(values.begin(), values.end());
    auto quantile = [&values](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return values[lo] + (values[hi] - values[lo]) * frac;
    };
    d.min = values.front();
    d.max = values.back();
    d.q1 = quantile(0.25);
    d.median = quantile(0.5);
    d.q3 = quantile(0.75);
    d.mean = mean_of(values);
    return d;
}

SentimentSummary sentiment_summary(const std::vector<DialogueInstance>& instances, const KnowledgeBase& kb,
                                   const SentimentLexicon& lex) {
    std::vector<double> means, stds, responses;
    for (const auto& inst : instances) {
        if (!inst.label || !inst.label->target) continue;
        const auto ks = dialogue_knowledge_sentiment(lex, kb, inst.label->refs);
        means.push_back(ks.mean);
        stds.push_back(ks.std);
        responses.push_back(score_text(lex, split_response(inst.label->response).summary));
    }
    SentimentSummary s;
    try {
        s.correlation = pearson(means, responses);
    } catch (const ValidationError&) {
        s.correlation = std::nullopt;
    }
    s.knowledge_mean = describe(std::move(means));
    s.knowledge_std = describe(std::move(stds));
    s.response = describe(std::move(responses));
    return s;
}

// --- serialisation -----------------------------------------------------------------

nlohmann::ordered_json to_json(const QuestionStats& s) {
    nlohmann::ordered_json top = nlohmann::ordered_json::array();
    for (const auto& [q, c] : s.top_k) top.push_back({{"question", q}, {"count", c}});
    return {{"responses", s.responses},
            {"with_question", s.with_question},
            {"pct_with_question", s.pct_with_question},
            {"unique_count", s.unique_count},
            {"singleton_count", s.singleton_count},
            {"singleton_pct", s.singleton_pct},
            {"top5_share", s.top_share(5)},
            {"top_k", std::move(top)}};
}

nlohmann::ordered_json to_json(const LengthStats& s) {
    return {{"count", s.count},
            {"avg_sentences", s.avg_sentences},
            {"std_sentences", s.std_sentences},
            {"avg_chars", s.avg_chars},
            {"std_chars", s.std_chars}};
}

nlohmann::ordered_json to_json(const Distribution& d) {
    return {{"count", d.count}, {"min", d.min}, {"q1", d.q1},     {"median", d.median},
            {"q3", d.q3},       {"max", d.max}, {"mean", d.mean}};
}

nlohmann::ordered_json to_json(const SentimentSummary& s) {
    return {{"knowledge_mean", to_json(s.knowledge_mean)},
            {"knowledge_std", to_json(s.knowledge_std)},
            {"response_summary", to_json(s.response)},
            {"correlation", s.correlation ? nlohmann::ordered_json(*s.correlation) : nlohmann::ordered_json(nullptr)}};
}

nlohmann::ordered_json to_json(const CorrelationMatrix& m) {
    nlohmann::ordered_json values = nlohmann::ordered_json::array();
    for (const auto& row : m.values) {
        nlohmann::ordered_json r = nlohmann::ordered_json::array();
        for (const auto& v : row) r.push_back(v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr));
        values.push_back(std::move(r));
    }
    return {{"labels", m.labels}, {"samples", m.samples}, {"values", std::move(values)}};
}

nlohmann::ordered_json to_json(const std::vector<ActRow>& rows) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        out.push_back({{"act", std::string(to_string(r.act))},
                       {"freq", r.freq},
                       {"avg_response_chars", r.avg_response_chars},
                       {"bleu", r.scores.bleu},
                       {"meteor", r.scores.meteor},
                       {"rouge1", r.scores.rouge1},
                       {"rouge2", r.scores.rouge2},
                       {"rougeL", r.scores.rougeL}});
    }
    return out;
}

namespace {

std::string csv_escape(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace

std::string to_csv(const CorrelationMatrix& m) {
    std::ostringstream out;
    out << std::setprecision(17) << "feature";
    for (const auto& l : m.labels) out << "," << l;
    out << "\n";
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        out << m.labels[i];
        for (const auto& v : m.values[i]) {
            out << ",";
            if (v) out << *v;
        }
        out << "\n";
    }
    return out.str();
}

std::string to_csv(const std::vector<ActRow>& rows) {
    std::ostringstream out;
    out << std::setprecision(17) << "act,freq,avg_response_chars,bleu,meteor,rouge1,rouge2,rougeL\n";
    for (const auto& r : rows) {
        out << to_string(r.act) << "," << r.freq << "," << r.avg_response_chars << "," << r.scores.bleu << ","
            << r.scores.meteor << "," << r.scores.rouge1 << "," << r.scores.rouge2 << "," << r.scores.rougeL << "\n";
    }
    return out.str();
}

std::string to_csv(const QuestionStats& s) {
    std::ostringstream out;
    out << "rank,question,count\n";
    for (std::size_t i = 0; i < s.top_k.size(); ++i)
        out << (i + 1) << "," << csv_escape(s.top_k[i].first) << "," << s.top_k[i].second << "\n";
    return out.str();
}

}  // namespace sktod
