#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sktod/corpus.hpp"

namespace sktod {

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    static PRF from(double precision, double recall);
};

struct SelectionScores {
    PRF prf;
    double em = 0.0;
};

struct GenerationScores {
    double bleu = 0.0;
    double meteor = 0.0;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
};

struct MetricReport {
    std::string system;
    PRF detection;
    SelectionScores selection;
    GenerationScores generation;
    std::size_t generation_count = 0;  // instances that entered the generation average
    std::optional<double> mrr;
};

using Tokens = std::vector<std::string>;

// Lowercases, splits on whitespace and emits every ASCII punctuation
// character as its own token.
Tokens tokenize(std::string_view text);

// Sentence BLEU, uniform 1..4-gram weights, brevity penalty; a zero clipped
// count is replaced by kBleuEpsilon before taking the log.
inline constexpr double kBleuEpsilon = 1e-9;
double bleu(const Tokens& candidate, const Tokens& reference);
double bleu(std::string_view candidate, std::string_view reference);

PRF rouge_n(const Tokens& candidate, const Tokens& reference, int n);
PRF rouge_n(std::string_view candidate, std::string_view reference, int n);
PRF rouge_l(const Tokens& candidate, const Tokens& reference);
PRF rouge_l(std::string_view candidate, std::string_view reference);
std::size_t lcs_length(const Tokens& a, const Tokens& b);

// METEOR without the synonym stage: exact unigram matches first, then Porter
// stem matches among the leftovers. F_mean = 10PR/(R+9P), penalty
// 0.5 * (chunks/matches)^3.
double meteor(const Tokens& candidate, const Tokens& reference);
double meteor(std::string_view candidate, std::string_view reference);

GenerationScores generation_scores(std::string_view candidate, std::string_view reference);

// Positive class is "knowledge-seeking" (true).
PRF detection_scores(const std::vector<bool>& preds, const std::vector<bool>& golds);

struct SelectionItem {
    bool gold_target = false;
    bool pred_target = false;
    std::vector<KnowledgeRef> gold;
    std::vector<KnowledgeRef> pred;
};

// Per-instance set precision/recall/F1 (and exact match), macro-averaged
// over gold-seeking instances.
SelectionScores selection_scores(const std::vector<SelectionItem>& items);

// Mean of 1/rank. Throws ValidationError on an empty map or a rank < 1.
double mrr(const std::map<std::string, int>& ranks);

// Generation scores are averaged over instances that are knowledge-seeking
// in both the gold labels and the predictions.
MetricReport evaluate_all(const std::vector<DialogueInstance>& instances, const std::vector<Prediction>& predictions);

// Mean generation scores over a subset of instance indices (same scope rule).
GenerationScores mean_generation_scores(const std::vector<DialogueInstance>& instances,
                                        const std::vector<Prediction>& predictions,
                                        const std::vector<std::size_t>& subset, std::size_t* count = nullptr);

// Ranks every system on each of the 12 scores (higher is better, ties share
// the best rank) and stores the mean reciprocal rank in each report.
void assign_mrr(std::vector<MetricReport>& reports);

nlohmann::ordered_json to_json(const MetricReport& r);
// Aligned text table with the sub-task 1/2/3 column groups and MRR.
std::string format_report_table(const std::vector<MetricReport>& reports);

}  // namespace sktod
