#include "sktod/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "sktod/errors.hpp"
#include "sktod/stemmer.hpp"

namespace sktod {

PRF PRF::from(double precision, double recall) {
    PRF out{precision, recall, 0.0};
    if (precision + recall > 0.0) out.f1 = 2.0 * precision * recall / (precision + recall);
    return out;
}

Tokens tokenize(std::string_view text) {
    Tokens tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (char c : text) {
        auto uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            flush();
        } else if (uc < 0x80 && std::ispunct(uc)) {
            flush();
            tokens.emplace_back(1, c);
        } else {
            current.push_back(static_cast<char>(std::tolower(uc)));
        }
    }
    flush();
    return tokens;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngram_counts(const Tokens& tokens, int n) {
    NgramCounts counts;
    const auto len = static_cast<std::size_t>(n);
    if (n <= 0 || tokens.size() < len) return counts;
    for (std::size_t i = 0; i + len <= tokens.size(); ++i)
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + len))];
    return counts;
}

std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
    std::size_t overlap = 0;
    for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end()) overlap += std::min(count, it->second);
    }
    return overlap;
}

}  // namespace

double bleu(const Tokens& candidate, const Tokens& reference) {
    if (candidate.empty()) return 0.0;
    double log_sum = 0.0;
    for (int n = 1; n <= 4; ++n) {
        const auto cand = ngram_counts(candidate, n);
        const auto ref = ngram_counts(reference, n);
        const auto overlap = clipped_overlap(cand, ref);
        const std::size_t total = candidate.size() >= static_cast<std::size_t>(n)
                                      ? candidate.size() - static_cast<std::size_t>(n) + 1
                                      : 0;
        const double denom = static_cast<double>(std::max<std::size_t>(1, total));
        const double numer = overlap == 0 ? kBleuEpsilon : static_cast<double>(overlap);
        log_sum += 0.25 * std::log(numer / denom);
    }
    const auto c = static_cast<double>(candidate.size());
    const auto r = static_cast<double>(reference.size());
    const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
    return std::clamp(bp * std::exp(log_sum), 0.0, 1.0);
}

double bleu(std::string_view candidate, std::string_view reference) {
    return bleu(tokenize(candidate), tokenize(reference));
}

PRF rouge_n(const Tokens& candidate, const Tokens& reference, int n) {
    if (n < 1) throw ValidationError("rouge_n: n must be >= 1");
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    const auto len = static_cast<std::size_t>(n);
    const std::size_t cand_total = candidate.size() >= len ? candidate.size() - len + 1 : 0;
    const std::size_t ref_total = reference.size() >= len ? reference.size() - len + 1 : 0;
    if (cand_total == 0 || ref_total == 0) return {};
    const auto overlap = static_cast<double>(clipped_overlap(cand, ref));
    return PRF::from(overlap / static_cast<double>(cand_total), overlap / static_cast<double>(ref_total));
}

PRF rouge_n(std::string_view candidate, std::string_view reference, int n) {
    return rouge_n(tokenize(candidate), tokenize(reference), n);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

PRF rouge_l(const Tokens& candidate, const Tokens& reference) {
    if (candidate.empty() || reference.empty()) return {};
    const auto lcs = static_cast<double>(lcs_length(candidate, reference));
    return PRF::from(lcs / static_cast<double>(candidate.size()), lcs / static_cast<double>(reference.size()));
}

PRF rouge_l(std::string_view candidate, std::string_view reference) {
    return rouge_l(tokenize(candidate), tokenize(reference));
}

double meteor(const Tokens& candidate, const Tokens& reference) {
    if (candidate.empty() || reference.empty()) return 0.0;
    // alignment[i] = matched reference position for candidate token i.
    std::vector<long> alignment(candidate.size(), -1);
    std::vector<bool> ref_used(reference.size(), false);
    auto align_stage = [&](auto&& key) {
        std::vector<std::string> ref_keys(reference.size());
        for (std::size_t j = 0; j < reference.size(); ++j)
            if (!ref_used[j]) ref_keys[j] = key(reference[j]);
        for (std::size_t i = 0; i < candidate.size(); ++i) {
            if (alignment[i] >= 0) continue;
            const auto k = key(candidate[i]);
            for (std::size_t j = 0; j < reference.size(); ++j) {
                if (!ref_used[j] && ref_keys[j] == k) {
                    alignment[i] = static_cast<long>(j);
                    ref_used[j] = true;
                    break;
                }
            }
        }
    };
    align_stage([](const std::string& t) { return t; });
    align_stage([](const std::string& t) { return porter_stem(t); });

    std::size_t matches = 0;
    std::size_t chunks = 0;
    long prev = -2;
    bool prev_matched = false;
    for (long j : alignment) {
        if (j < 0) {
            prev_matched = false;
            continue;
        }
        ++matches;
        if (!prev_matched || j != prev + 1) ++chunks;
        prev = j;
        prev_matched = true;
    }
    if (matches == 0) return 0.0;
    const double m = static_cast<double>(matches);
    const double p = m / static_cast<double>(candidate.size());
    const double r = m / static_cast<double>(reference.size());
    const double fmean = 10.0 * p * r / (r + 9.0 * p);
    const double penalty = 0.5 * std::pow(static_cast<double>(chunks) / m, 3.0);
    return std::clamp(fmean * (1.0 - penalty), 0.0, 1.0);
}

double meteor(std::string_view candidate, std::string_view reference) {
    return meteor(tokenize(candidate), tokenize(reference));
}

GenerationScores generation_scores(std::string_view candidate, std::string_view reference) {
    const auto c = tokenize(candidate);
    const auto r = tokenize(reference);
    return {bleu(c, r), meteor(c, r), rouge_n(c, r, 1).f1, rouge_n(c, r, 2).f1, rouge_l(c, r).f1};
}

PRF detection_scores(const std::vector<bool>& preds, const std::vector<bool>& golds) {
    if (preds.size() != golds.size())
        throw ValidationError("detection: length mismatch (" + std::to_string(preds.size()) + " vs " +
                              std::to_string(golds.size()) + ")");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] && golds[i]) ++tp;
        else if (preds[i]) ++fp;
        else if (golds[i]) ++fn;
    }
    const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    return PRF::from(p, r);
}

SelectionScores selection_scores(const std::vector<SelectionItem>& items) {
    double sp = 0.0, sr = 0.0, sf = 0.0, sem = 0.0;
    std::size_t n = 0;
    for (const auto& item : items) {
        if (!item.gold_target) continue;
        ++n;
        if (!item.pred_target) continue;
        const std::set<KnowledgeRef> gold(item.gold.begin(), item.gold.end());
        const std::set<KnowledgeRef> pred(item.pred.begin(), item.pred.end());
        std::size_t hit = 0;
        for (const auto& r : pred) hit += gold.count(r);
        const double p = pred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred.size());
        const double r = gold.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(gold.size());
        const auto prf = PRF::from(p, r);
        sp += prf.precision;
        sr += prf.recall;
        sf += prf.f1;
        if (!pred.empty() && pred == gold) sem += 1.0;
    }
    if (n == 0) return {};
    const auto dn = static_cast<double>(n);
    return {{sp / dn, sr / dn, sf / dn}, sem / dn};
}

double mrr(const std::map<std::string, int>& ranks) {
    if (ranks.empty()) throw ValidationError("mrr: no ranks given");
    double sum = 0.0;
    for (const auto& [name, rank] : ranks) {
        if (rank < 1) throw ValidationError("mrr: rank of \"" + name + "\" must be >= 1");
        sum += 1.0 / rank;
    }
    return sum / static_cast<double>(ranks.size());
}

namespace {

void check_alignment(const std::vector<DialogueInstance>& instances, const std::vector<Prediction>& predictions) {
    if (instances.size() != predictions.size())
        throw ValidationError("alignment error: " + std::to_string(instances.size()) + " instances vs " +
                              std::to_string(predictions.size()) + " predictions");
    for (const auto& inst : instances) {
        if (!inst.label) throw ValidationError("evaluation needs gold labels (instance " + std::to_string(inst.id) + ")");
    }
}

bool in_generation_scope(const DialogueInstance& inst, const Prediction& pred) {
    return inst.label && inst.label->target && pred.target;
}

}  // namespace

GenerationScores mean_generation_scores(const std::vector<DialogueInstance>& instances,
                                        const std::vector<Prediction>& predictions,
                                        const std::vector<std::size_t>& subset, std::size_t* count) {
    GenerationScores sum;
    std::size_t n = 0;
    for (std::size_t idx : subset) {
        const auto& inst = instances.at(idx);
        const auto& pred = predictions.at(idx);
        if (!in_generation_scope(inst, pred)) continue;
        const auto s = generation_scores(pred.response, inst.label->response);
        sum.bleu += s.bleu;
        sum.meteor += s.meteor;
        sum.rouge1 += s.rouge1;
        sum.rouge2 += s.rouge2;
        sum.rougeL += s.rougeL;
        ++n;
    }
    if (count) *count = n;
    if (n == 0) return {};
    const auto dn = static_cast<double>(n);
    return {sum.bleu / dn, sum.meteor / dn, sum.rouge1 / dn, sum.rouge2 / dn, sum.rougeL / dn};
}

MetricReport evaluate_all(const std::vector<DialogueInstance>& instances, const std::vector<Prediction>& predictions) {
    check_alignment(instances, predictions);
    MetricReport report;
    std::vector<bool> preds, golds;
    std::vector<SelectionItem> items;
    std::vector<std::size_t> all(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& gold = *instances[i].label;
        const auto& pred = predictions[i];
        preds.push_back(pred.target);
        golds.push_back(gold.target);
        items.push_back({gold.target, pred.target, gold.refs, pred.refs});
        all[i] = i;
    }
    report.detection = detection_scores(preds, golds);
    report.selection = selection_scores(items);
    report.generation = mean_generation_scores(instances, predictions, all, &report.generation_count);
    return report;
}

namespace {

std::array<double, 12> score_vector(const MetricReport& r) {
    return {r.detection.precision, r.detection.recall,  r.detection.f1,       r.selection.prf.precision,
            r.selection.prf.recall, r.selection.prf.f1, r.selection.em,       r.generation.bleu,
            r.generation.meteor,    r.generation.rouge1, r.generation.rouge2, r.generation.rougeL};
}

const std::array<const char*, 12> kScoreNames = {"det_p",  "det_r", "det_f1", "sel_p",  "sel_r",  "sel_f1",
                                                 "sel_em", "bleu",  "meteor", "rouge1", "rouge2", "rougeL"};

}  // namespace

void assign_mrr(std::vector<MetricReport>& reports) {
    std::vector<std::array<double, 12>> scores;
    for (const auto& r : reports) scores.push_back(score_vector(r));
    for (std::size_t s = 0; s < reports.size(); ++s) {
        std::map<std::string, int> ranks;
        for (std::size_t m = 0; m < kScoreNames.size(); ++m) {
            int better = 0;
            for (std::size_t o = 0; o < reports.size(); ++o)
                if (scores[o][m] > scores[s][m]) ++better;
            ranks[kScoreNames[m]] = better + 1;
        }
        reports[s].mrr = mrr(ranks);
    }
}

nlohmann::ordered_json to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    if (!r.system.empty()) j["system"] = r.system;
    j["detection"] = {{"precision", r.detection.precision}, {"recall", r.detection.recall}, {"f1", r.detection.f1}};
    j["selection"] = {{"precision", r.selection.prf.precision},
                      {"recall", r.selection.prf.recall},
                      {"f1", r.selection.prf.f1},
                      {"em", r.selection.em}};
    j["generation"] = {{"bleu", r.generation.bleu},
                       {"meteor", r.generation.meteor},
                       {"rouge1", r.generation.rouge1},
                       {"rouge2", r.generation.rouge2},
                       {"rougeL", r.generation.rougeL},
                       {"count", r.generation_count}};
    j["mrr"] = r.mrr ? nlohmann::ordered_json(*r.mrr) : nlohmann::ordered_json(nullptr);
    return j;
}

std::string format_report_table(const std::vector<MetricReport>& reports) {
    std::size_t name_width = 8;
    for (const auto& r : reports) name_width = std::max(name_width, r.system.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_width)) << "Approach"
        << " | sub-task 1          | sub-task 2                 | sub-task 3                          | Total\n";
    out << std::setw(static_cast<int>(name_width)) << ""
        << " | P     R     F1      | P     R     F1    EM       | BLEU  METEOR R-1   R-2   R-L      | MRR\n";
    out << std::fixed << std::setprecision(3);
    for (const auto& r : reports) {
        out << std::left << std::setw(static_cast<int>(name_width)) << (r.system.empty() ? "system" : r.system)
            << " | " << r.detection.precision << " " << r.detection.recall << " " << r.detection.f1 << "   "
            << " | " << r.selection.prf.precision << " " << r.selection.prf.recall << " " << r.selection.prf.f1 << " "
            << r.selection.em << "   "
            << " | " << r.generation.bleu << " " << r.generation.meteor << "  " << r.generation.rouge1 << " "
            << r.generation.rouge2 << " " << r.generation.rougeL << "   "
            << " | ";
        if (r.mrr) out << *r.mrr;
        else out << "NA";
        out << "\n";
    }
    return out.str();
}

}  // namespace sktod
