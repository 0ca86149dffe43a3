#include "sktod/sentiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "sktod/errors.hpp"
#include "sktod/text.hpp"

namespace sktod {

namespace detail {
extern const std::string_view kBuiltinLexiconTsv;
}

SentimentLexicon::SentimentLexicon(std::map<std::string, double, std::less<>> valences,
                                   std::set<std::string, std::less<>> negators, int negation_window)
    : valences_(std::move(valences)), negators_(std::move(negators)), negation_window_(negation_window) {
    if (negation_window_ < 0) throw ValidationError("negation window must be non-negative");
    for (const auto& [token, v] : valences_) {
        if (!(v >= -1.0 && v <= 1.0))
            throw ValidationError("valence of \"" + token + "\" outside [-1, 1]");
        if (negators_.contains(token))
            throw ValidationError("\"" + token + "\" is both a negator and a valence token");
    }
}

const std::set<std::string, std::less<>>& SentimentLexicon::default_negators() {
    static const std::set<std::string, std::less<>> negators = {
        "not",     "no",       "never",    "nothing",  "none",     "nobody",  "neither", "nor",
        "without", "hardly",   "barely",   "cannot",   "can't",    "don't",   "doesn't", "didn't",
        "isn't",   "wasn't",   "aren't",   "weren't",  "won't",    "wouldn't", "couldn't", "shouldn't",
        "hasn't",  "haven't",  "hadn't",   "ain't",    "dont",     "didnt",   "wasnt",   "isnt"};
    return negators;
}

SentimentLexicon SentimentLexicon::from_tsv(std::string_view content, std::string_view source) {
    std::map<std::string, double, std::less<>> valences;
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto trimmed = text::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        auto tab = trimmed.find('\t');
        const std::string where = std::string(source) + ":" + std::to_string(lineno);
        if (tab == std::string::npos) throw ParseError(where + ": expected \"token<TAB>score\"");
        auto token = text::to_lower(text::trim(trimmed.substr(0, tab)));
        auto score_str = text::trim(trimmed.substr(tab + 1));
        double score = 0.0;
        try {
            std::size_t used = 0;
            score = std::stod(score_str, &used);
            if (used != score_str.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ParseError(where + ": invalid score \"" + score_str + "\"");
        }
        if (!valences.emplace(token, score).second) throw ValidationError(where + ": duplicate token \"" + token + "\"");
    }
    return SentimentLexicon(std::move(valences), default_negators());
}

SentimentLexicon SentimentLexicon::load(const std::filesystem::path& path) {
    return from_tsv(read_file(path), path.string());
}

const SentimentLexicon& SentimentLexicon::builtin() {
    static const SentimentLexicon lex = from_tsv(detail::kBuiltinLexiconTsv, "builtin lexicon");
    return lex;
}

const double* SentimentLexicon::valence(std::string_view token) const {
    auto it = valences_.find(token);
    return it == valences_.end() ? nullptr : &it->second;
}

std::vector<std::string> sentiment_tokens(std::string_view raw) {
    const auto folded = text::fold_apostrophes(raw);
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        // Drop quote-like apostrophes at the edges ('great' -> great).
        while (!current.empty() && current.front() == '\'') current.erase(current.begin());
        while (!current.empty() && current.back() == '\'') current.pop_back();
        if (!current.empty()) tokens.push_back(text::to_lower(current));
        current.clear();
    };
    for (char c : folded) {
        auto uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc) || c == '\'' || uc >= 0x80) {
            current.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

double score_text(const SentimentLexicon& lex, std::string_view text_in) {
    const auto tokens = sentiment_tokens(text_in);
    double sum = 0.0;
    std::size_t hits = 0;
    const auto window = static_cast<std::size_t>(lex.negation_window());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const double* v = lex.valence(tokens[i]);
        if (v == nullptr) continue;
        bool negated = false;
        for (std::size_t back = 1; back <= window && back <= i; ++back) {
            if (lex.is_negator(tokens[i - back])) {
                negated = true;
                break;
            }
        }
        sum += negated ? -*v : *v;
        ++hits;
    }
    if (hits == 0) return 0.0;
    return std::clamp(sum / static_cast<double>(hits), -1.0, 1.0);
}

DialogueSentiment dialogue_knowledge_sentiment(const SentimentLexicon& lex, const KnowledgeBase& kb,
                                               const std::vector<KnowledgeRef>& refs) {
    DialogueSentiment out;
    out.per_item.reserve(refs.size());
    for (const auto& ref : refs) out.per_item.push_back(score_text(lex, resolve_ref(kb, ref).text));
    if (out.per_item.empty()) return out;
    const auto n = static_cast<double>(out.per_item.size());
    double sum = 0.0;
    for (double v : out.per_item) sum += v;
    out.mean = sum / n;
    double ss = 0.0;
    for (double v : out.per_item) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / n);
    // Keep the mean inside [min, max] under rounding.
    auto [lo, hi] = std::minmax_element(out.per_item.begin(), out.per_item.end());
    out.mean = std::clamp(out.mean, *lo, *hi);
    return out;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size())
        throw ValidationError("pearson: length mismatch (" + std::to_string(xs.size()) + " vs " +
                              std::to_string(ys.size()) + ")");
    if (xs.size() < 2) throw ValidationError("pearson: need at least two points");
    const std::size_t n = xs.size();
    // Shifted by the first sample, then two-pass centred sums.
    std::vector<double> u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = xs[i] - xs[0];
        v[i] = ys[i] - ys[0];
    }
    double su = 0.0, sv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        su += u[i];
        sv += v[i];
    }
    const double mu = su / static_cast<double>(n);
    const double mv = sv / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double du = u[i] - mu;
        const double dv = v[i] - mv;
        sxy += du * dv;
        sxx += du * du;
        syy += dv * dv;
    }
    if (sxx == 0.0 || syy == 0.0) throw ValidationError("pearson: zero variance input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace sktod
