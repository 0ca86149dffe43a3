#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sktod/corpus.hpp"

namespace sktod {

// Token valences in [-1, 1] plus a negator set. A valence token preceded by
// a negator within `negation_window` tokens contributes its negated value.
class SentimentLexicon {
public:
    SentimentLexicon(std::map<std::string, double, std::less<>> valences, std::set<std::string, std::less<>> negators,
                     int negation_window = 3);

    // Lexicon compiled into the library from data/lexicon.tsv.
    static const SentimentLexicon& builtin();
    static SentimentLexicon from_tsv(std::string_view content, std::string_view source = "<lexicon>");
    static SentimentLexicon load(const std::filesystem::path& path);

    static const std::set<std::string, std::less<>>& default_negators();

    const double* valence(std::string_view token) const;
    bool is_negator(std::string_view token) const { return negators_.contains(token); }
    int negation_window() const { return negation_window_; }
    std::size_t size() const { return valences_.size(); }

private:
    std::map<std::string, double, std::less<>> valences_;
    std::set<std::string, std::less<>> negators_;
    int negation_window_;
};

// Lowercased word tokens (letters, digits, apostrophes) used for lexicon lookup.
std::vector<std::string> sentiment_tokens(std::string_view text);

// Mean of the (negation-adjusted) valences of the lexicon hits, clamped to
// [-1, 1]; 0 when nothing in the text is in the lexicon.
double score_text(const SentimentLexicon& lex, std::string_view text);

struct DialogueSentiment {
    double mean = 0.0;
    double std = 0.0;  // population
    std::vector<double> per_item;
};

DialogueSentiment dialogue_knowledge_sentiment(const SentimentLexicon& lex, const KnowledgeBase& kb,
                                               const std::vector<KnowledgeRef>& refs);

// Product-moment correlation. Throws ValidationError on length mismatch,
// fewer than two points, or a zero-variance input.
double pearson(std::span<const double> xs, std::span<const double> ys);

}  // namespace sktod
