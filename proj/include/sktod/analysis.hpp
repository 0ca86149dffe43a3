#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sktod/corpus.hpp"
#include "sktod/metrics.hpp"
#include "sktod/sentiment.hpp"

namespace sktod {

// A system response seen as "summary + [optional] question".
struct SplitResponse {
    std::string summary;
    std::optional<std::string> question;
};

SplitResponse split_response(std::string_view text);

struct QuestionStats {
    std::size_t responses = 0;
    std::size_t with_question = 0;
    std::size_t unique_count = 0;
    std::size_t singleton_count = 0;
    double pct_with_question = 0.0;  // fraction in [0, 1]
    double singleton_pct = 0.0;      // singletons / unique questions
    std::vector<std::pair<std::string, std::size_t>> top_k;  // count desc, then lexicographic

    // Share of all question occurrences covered by the n most frequent questions.
    double top_share(std::size_t n) const;
};

// Modal trailing question; ties go to the lexicographically smallest.
// Throws ValidationError when no response carries a question.
std::pair<std::string, std::size_t> most_frequent_question(const std::vector<std::string>& responses);

QuestionStats question_stats(const std::vector<std::string>& responses, std::size_t k = 100);

struct LengthStats {
    std::size_t count = 0;
    double avg_sentences = 0.0;
    double std_sentences = 0.0;
    double avg_chars = 0.0;
    double std_chars = 0.0;
};

// Population statistics; characters are Unicode code points.
LengthStats length_stats(const std::vector<std::string>& responses);

enum class DialogueAct {
    yes_no_question,
    open_question_opinion,
    open_question_factual,
    statement,
    command,
    opinion,
    pos_answer,
    neg_answer,
    complaint,
    comment,
    nonsense,
};

inline constexpr std::array<DialogueAct, 11> kAllDialogueActs = {
    DialogueAct::yes_no_question, DialogueAct::open_question_opinion, DialogueAct::open_question_factual,
    DialogueAct::statement,       DialogueAct::command,               DialogueAct::opinion,
    DialogueAct::pos_answer,      DialogueAct::neg_answer,            DialogueAct::complaint,
    DialogueAct::comment,         DialogueAct::nonsense};

std::string_view to_string(DialogueAct act);

// Deterministic rule cascade standing in for a neural act tagger.
//  1. no letters at all                         -> nonsense
//  2. starts with a wh-word: opinion cue present -> open_question_opinion
//                            otherwise           -> open_question_factual
//  3. ends with '?'                             -> yes_no_question
//  4. whole utterance is a yes/no form          -> pos_answer / neg_answer
//  5. only backchannel words (thanks, wow, ...) -> comment
//  6. starts with an imperative verb            -> command
//  7. first person + evaluative verb            -> complaint if the text
//                                                  scores negative, else opinion
//  8. otherwise                                 -> statement
DialogueAct tag_dialogue_act(std::string_view utterance,
                             const SentimentLexicon& lex = SentimentLexicon::builtin());

struct ActRow {
    DialogueAct act = DialogueAct::statement;
    std::size_t freq = 0;
    double avg_response_chars = 0.0;
    GenerationScores scores;
};

// One row per act seen among gold knowledge-seeking instances, tagged on the
// last user utterance; sorted by frequency (desc) then act order.
std::vector<ActRow> per_act_report(const std::vector<DialogueInstance>& instances,
                                   const std::vector<Prediction>& predictions,
                                   const SentimentLexicon& lex = SentimentLexicon::builtin());

inline constexpr std::array<std::string_view, 6> kFeatureNames = {
    "n_turns", "n_knowledge_items", "ref_chars", "ref_sentences", "pred_chars", "pred_sentences"};

struct CorrelationMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<std::optional<double>>> values;  // nullopt = undefined (zero variance)
    std::size_t samples = 0;
};

// Pairwise Pearson correlation of the six features over instances that are
// knowledge-seeking in both gold and prediction.
CorrelationMatrix feature_correlations(const std::vector<DialogueInstance>& instances,
                                       const std::vector<Prediction>& predictions);

struct Distribution {
    std::size_t count = 0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
};

// Linear-interpolation quartiles; empty input gives count = 0.
Distribution describe(std::vector<double> values);

struct SentimentSummary {
    Distribution knowledge_mean;  // per-dialogue mean knowledge sentiment
    Distribution knowledge_std;   // per-dialogue spread of knowledge sentiment
    Distribution response;        // sentiment of the summary part of the reference
    std::optional<double> correlation;  // knowledge mean vs response summary
};

SentimentSummary sentiment_summary(const std::vector<DialogueInstance>& instances, const KnowledgeBase& kb,
                                   const SentimentLexicon& lex);

nlohmann::ordered_json to_json(const QuestionStats& s);
nlohmann::ordered_json to_json(const LengthStats& s);
nlohmann::ordered_json to_json(const Distribution& d);
nlohmann::ordered_json to_json(const SentimentSummary& s);
nlohmann::ordered_json to_json(const CorrelationMatrix& m);
nlohmann::ordered_json to_json(const std::vector<ActRow>& rows);

std::string to_csv(const CorrelationMatrix& m);
std::string to_csv(const std::vector<ActRow>& rows);
std::string to_csv(const QuestionStats& s);

}  // namespace sktod
