#include "sktod/augment.hpp"

#include <algorithm>

#include "sktod/json_io.hpp"
#include "sktod/text.hpp"

namespace sktod {

// --- traveler types ----------------------------------------------------------------

TravelerTypeMap::TravelerTypeMap(const std::map<std::string, std::string>& aliases) {
    for (const auto& [alias, canon] : aliases) {
        const auto c = text::trim(canon);
        if (c.empty()) throw ValidationError("traveler type alias \"" + alias + "\" maps to an empty name");
        auto [it, inserted] = by_key_.emplace(text::to_lower(text::trim(alias)), c);
        if (!inserted && it->second != c)
            throw ValidationError("traveler type alias \"" + alias + "\" maps to both \"" + it->second + "\" and \"" +
                                  c + "\"");
    }
    for (const auto& [alias, canon] : aliases) {
        const auto c = text::trim(canon);
        auto [it, inserted] = by_key_.emplace(text::to_lower(c), c);
        if (!inserted && it->second != c)
            throw ValidationError("canonical traveler type \"" + c + "\" is itself mapped to \"" + it->second + "\"");
    }
}

TravelerTypeMap TravelerTypeMap::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("traveler type map must be a JSON object of alias -> canonical name");
    std::map<std::string, std::string> aliases;
    for (const auto& [k, v] : j.items()) {
        if (!v.is_string()) throw ParseError("traveler type map: value of \"" + k + "\" is not a string");
        aliases.emplace(k, v.get<std::string>());
    }
    return TravelerTypeMap(aliases);
}

TravelerTypeMap TravelerTypeMap::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

std::optional<std::string> TravelerTypeMap::canonical(std::string_view type) const {
    auto it = by_key_.find(text::to_lower(text::trim(type)));
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
}

std::set<std::string> TravelerTypeMap::canonical_names() const {
    std::set<std::string> out;
    for (const auto& [k, v] : by_key_) {
        (void)k;
        out.insert(v);
    }
    return out;
}

NormalizeReport normalize_traveler_types(IdMap<Review>& reviews, const TravelerTypeMap& map) {
    NormalizeReport report;
    for (auto& [id, review] : reviews) {
        (void)id;
        if (auto c = map.canonical(review.traveler_type)) {
            if (*c != review.traveler_type) {
                review.traveler_type = *c;
                ++report.changed;
            }
        } else {
            ++report.unknown[review.traveler_type];
        }
    }
    return report;
}

namespace {

void absorb(NormalizeReport& into, const NormalizeReport& r) {
    into.changed += r.changed;
    for (const auto& [t, n] : r.unknown) into.unknown[t] += n;
}

}  // namespace

NormalizeReport normalize_traveler_types(KnowledgeBase& kb, const TravelerTypeMap& map) {
    NormalizeReport report;
    for (auto& [dname, domain] : kb.domains) {
        (void)dname;
        for (auto& [eid, entity] : domain) {
            (void)eid;
            absorb(report, normalize_traveler_types(entity.reviews, map));
        }
    }
    return report;
}

// --- prompts -----------------------------------------------------------------------

namespace {

std::string number_word(int n) {
    static const char* kWords[] = {"zero", "one", "two",   "three", "four", "five",
                                   "six",  "seven", "eight", "nine",  "ten"};
    if (n >= 0 && n <= 10) return kWords[n];
    return std::to_string(n);
}

}  // namespace

std::string review_stub(long long next_id) {
    return "\"" + std::to_string(next_id) + "\": {\"traveler_type\":";
}

PromptBundle build_review_prompt(const Entity& entity, const ReviewPromptOptions& opts) {
    if (entity.reviews.empty())
        throw ValidationError("review prompt: entity \"" + entity.name + "\" has no reviews to continue from");
    if (opts.per_entity_types < 1 || opts.sentences_per_review < 1)
        throw ValidationError("review prompt: type and sentence counts must be >= 1");
    std::string slots;
    for (int i = 0; i < opts.sentences_per_review; ++i) {
        if (i > 0) slots += ", ";
        slots += "\"<id>\": \"<review>\"";
    }
    std::string text = "Please provide new reviews for the " + entity.name + " but for " +
                       number_word(opts.per_entity_types) + " different traveler_type.\n";
    text += "Continue the counting of the reviews and make sure the new reviews are in a dict format like this:\n";
    text += "\"<id>\": {\"traveler_type\": \"<traveler_type>\", \"sentences\": {" + slots + "}},\n\n";
    text += "These are the existing reviews: " + reviews_to_json(entity.reviews).dump() + ".\n\n";
    text += "Take this start and continue. Use double quotes to comply with json format.\n\n";
    text += review_stub(next_free_id(entity.reviews));
    return PromptBundle::completion(std::move(text), opts.max_tokens);
}

PromptBundle build_domain_review_prompt(std::string_view entity_id, std::string_view entity_name,
                                        const IdMap<Faq>& faqs, int max_tokens) {
    if (faqs.empty())
        throw ValidationError("domain review prompt: entity \"" + std::string(entity_name) + "\" has no FAQs");
    nlohmann::ordered_json faq_obj = nlohmann::ordered_json::object();
    for (const auto& [id, f] : faqs) faq_obj[id] = {{"question", f.question}, {"answer", f.answer}};
    nlohmann::ordered_json example;
    example[std::string(entity_id)] = {{"name", std::string(entity_name)}, {"faqs", std::move(faq_obj)}};
    std::string text = "Given this example:\n\n" + example.dump(4) + ",\n\n";
    text += "can you generate three more reviews, not more than 2 sentences, as: traveler type: review?";
    return PromptBundle::completion(std::move(text), max_tokens);
}

// --- tolerant parsing --------------------------------------------------------------

namespace {

char prev_significant(const std::string& s) {
    for (auto it = s.rbegin(); it != s.rend(); ++it)
        if (!std::isspace(static_cast<unsigned char>(*it))) return *it;
    return '\0';
}

char next_significant(std::string_view s, std::size_t from) {
    for (std::size_t i = from; i < s.size(); ++i)
        if (!std::isspace(static_cast<unsigned char>(s[i]))) return s[i];
    return '\0';
}

// Single-quoted strings in structural positions become double-quoted.
std::string normalize_quotes(std::string_view s, const std::string& raw) {
    enum { outside, in_double, in_single } state = outside;
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        switch (state) {
        case in_double:
            out.push_back(c);
            if (c == '\\' && i + 1 < s.size()) out.push_back(s[++i]);
            else if (c == '"') state = outside;
            break;
        case in_single:
            if (c == '\\' && i + 1 < s.size() && s[i + 1] == '\'') {
                out.push_back('\'');
                ++i;
            } else if (c == '\\' && i + 1 < s.size()) {
                out.push_back(c);
                out.push_back(s[++i]);
            } else if (c == '"') {
                out += "\\\"";
            } else if (c == '\'' && std::string_view(":,}]").find(next_significant(s, i + 1)) != std::string_view::npos) {
                out.push_back('"');
                state = outside;
            } else {
                out.push_back(c);
            }
            break;
        case outside:
            if (c == '"') {
                state = in_double;
                out.push_back(c);
            } else if (c == '\'' && std::string_view("{[,:").find(prev_significant(out)) != std::string_view::npos) {
                state = in_single;
                out.push_back('"');
            } else {
                out.push_back(c);
            }
            break;
        }
    }
    if (state != outside) throw AugmentParseError("generated reviews: unterminated string", raw);
    return out;
}

// Calls fn(i) for every character index outside string literals.
template <typename Fn>
void for_each_structural(std::string_view s, Fn fn) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_str) {
            if (c == '\\') ++i;
            else if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') {
            in_str = true;
            continue;
        }
        fn(i);
    }
}

std::string strip_trailing_commas(std::string_view s) {
    std::vector<bool> drop(s.size(), false);
    for_each_structural(s, [&](std::size_t i) {
        if (s[i] != ',') return;
        const char next = next_significant(s, i + 1);
        if (next == '}' || next == ']' || next == '\0') drop[i] = true;
    });
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!drop[i]) out.push_back(s[i]);
    return out;
}

std::string balance_braces(std::string_view s, const std::string& raw) {
    std::vector<bool> drop(s.size(), false);
    std::vector<char> stack;
    for_each_structural(s, [&](std::size_t i) {
        const char c = s[i];
        if (c == '{' || c == '[') {
            stack.push_back(c);
        } else if (c == '}' || c == ']') {
            if (stack.empty()) {
                drop[i] = true;  // excess closer
                return;
            }
            const char want = stack.back() == '{' ? '}' : ']';
            if (c != want) throw AugmentParseError("generated reviews: mismatched brackets", raw);
            stack.pop_back();
        }
    });
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!drop[i]) out.push_back(s[i]);
    while (!stack.empty()) {
        out.push_back(stack.back() == '{' ? '}' : ']');
        stack.pop_back();
    }
    return out;
}

Review review_from_json(const nlohmann::json& v, const std::string& id, const std::string& raw) {
    const std::string where = "generated review " + id;
    if (!v.is_object()) throw AugmentParseError(where + ": not an object", raw);
    if (!v.contains("traveler_type") || !v["traveler_type"].is_string() ||
        text::trim(v["traveler_type"].get<std::string>()).empty())
        throw AugmentParseError(where + ": missing or empty traveler_type", raw);
    if (!v.contains("sentences") || !v["sentences"].is_object() || v["sentences"].empty())
        throw AugmentParseError(where + ": missing or empty sentences", raw);
    std::vector<std::pair<long long, std::string>> sentences;
    for (const auto& [sid, sv] : v["sentences"].items()) {
        if (!text::is_decimal_id(sid)) throw AugmentParseError(where + ": sentence id \"" + sid + "\" is not numeric", raw);
        if (!sv.is_string() || text::trim(sv.get<std::string>()).empty())
            throw AugmentParseError(where + ": sentence " + sid + " is empty", raw);
        sentences.emplace_back(std::stoll(sid), text::trim(sv.get<std::string>()));
    }
    std::sort(sentences.begin(), sentences.end());
    Review r;
    r.traveler_type = text::trim(v["traveler_type"].get<std::string>());
    for (std::size_t i = 0; i < sentences.size(); ++i) r.sentences[std::to_string(i)] = sentences[i].second;
    return r;
}

}  // namespace

ParsedReviews parse_generated_reviews(std::string_view text_in, long long start_id) {
    const std::string raw(text_in);
    ParsedReviews out;
    auto s = text::trim(text_in);
    if (s.empty()) throw AugmentParseError("generated reviews: empty output", raw);

    const bool whole_object = s.front() == '{';
    if (!whole_object && !s.starts_with("\"" + std::to_string(start_id) + "\"")) {
        s = review_stub(start_id) + " " + s;
        out.repairs.push_back("stub");
    }
    auto step = normalize_quotes(s, raw);
    if (step != s) out.repairs.push_back("quotes");
    s = std::move(step);
    step = strip_trailing_commas(s);
    if (step != s) out.repairs.push_back("trailing_commas");
    s = std::move(step);
    step = balance_braces(s, raw);
    if (step != s) out.repairs.push_back("braces");
    s = std::move(step);
    if (!whole_object) s = "{" + s + "}";
    out.repaired = s;

    nlohmann::json doc;
    try {
        doc = parse_json_strict(s, "generated reviews");
    } catch (const ParseError& e) {
        throw AugmentParseError(std::string("generated reviews: unrecoverable output: ") + e.what(), raw);
    }
    if (!doc.is_object() || doc.empty()) throw AugmentParseError("generated reviews: no reviews found", raw);

    std::vector<long long> ids;
    for (const auto& [k, v] : doc.items()) {
        if (!text::is_decimal_id(k)) throw AugmentParseError("generated reviews: id \"" + k + "\" is not numeric", raw);
        ids.push_back(std::stoll(k));
        out.reviews[k] = review_from_json(v, k, raw);
    }
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] != start_id + static_cast<long long>(i))
            throw AugmentParseError("generated reviews: ids must run from " + std::to_string(start_id) +
                                        " without gaps; expected " + std::to_string(start_id + static_cast<long long>(i)) +
                                        ", found " + std::to_string(ids[i]),
                                    raw);
    }
    return out;
}

std::vector<Review> parse_domain_reviews(std::string_view text_in) {
    std::vector<Review> out;
    std::string line;
    std::string all(text_in);
    std::size_t pos = 0;
    while (pos <= all.size()) {
        const auto nl = all.find('\n', pos);
        line = all.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? all.size() + 1 : nl + 1;

        auto t = text::trim(line);
        while (!t.empty() && (t.front() == '-' || t.front() == '*')) t = text::trim(std::string_view(t).substr(1));
        std::size_t digits = 0;
        while (digits < t.size() && std::isdigit(static_cast<unsigned char>(t[digits]))) ++digits;
        if (digits > 0 && digits < t.size() && (t[digits] == '.' || t[digits] == ')'))
            t = text::trim(std::string_view(t).substr(digits + 1));
        const auto colon = t.find(':');
        if (colon == std::string::npos) continue;
        auto type = text::trim(std::string_view(t).substr(0, colon));
        auto body = text::trim(std::string_view(t).substr(colon + 1));
        if (body.size() >= 2 && body.front() == '"' && body.back() == '"') body = body.substr(1, body.size() - 2);
        if (type.empty() || body.empty()) continue;
        Review r;
        r.traveler_type = type;
        const auto sentences = text::split_sentences(body);
        for (std::size_t i = 0; i < sentences.size(); ++i) r.sentences[std::to_string(i)] = sentences[i];
        out.push_back(std::move(r));
    }
    if (out.empty()) throw AugmentParseError("domain reviews: no \"traveler type: review\" lines found", std::string(text_in));
    return out;
}

// --- drivers -----------------------------------------------------------------------

nlohmann::ordered_json to_json(const AugmentReport& r) {
    nlohmann::ordered_json unknown = nlohmann::ordered_json::object();
    for (const auto& [t, n] : r.types.unknown) unknown[t] = n;
    auto failures = nlohmann::ordered_json::array();
    for (const auto& [where, msg] : r.failures) failures.push_back({{"entity", where}, {"error", msg}});
    return {{"entities", r.entities},
            {"added_reviews", r.added_reviews},
            {"truncated", r.truncated},
            {"types_changed", r.types.changed},
            {"unknown_types", std::move(unknown)},
            {"failures", std::move(failures)}};
}

KnowledgeBase augment_existing(const KnowledgeBase& kb, Backend& backend, const AugmentOptions& opts,
                               const TravelerTypeMap* types, AugmentReport& report) {
    KnowledgeBase out = kb;
    for (const auto& dname : opts.domains) {
        auto dit = out.domains.find(dname);
        if (dit == out.domains.end()) continue;
        for (auto& [eid, entity] : dit->second) {
            if (entity.reviews.empty()) continue;
            ++report.entities;
            const auto where = dname + "/" + eid;
            try {
                const auto start = next_free_id(entity.reviews);
                const auto result = backend.generate({build_review_prompt(entity, opts.prompt), opts.model});
                report.truncated += result.truncated;
                auto parsed = parse_generated_reviews(result.text, start);
                if (types) absorb(report.types, normalize_traveler_types(parsed.reviews, *types));
                report.added_reviews += parsed.reviews.size();
                for (auto& [rid, review] : parsed.reviews) entity.reviews.emplace(rid, std::move(review));
            } catch (const Error& e) {
                report.failures.emplace_back(where, e.what());
            }
        }
    }
    return out;
}

KnowledgeBase augment_new_domains(const KnowledgeBase& kb, const KnowledgeBase& extra, Backend& backend,
                                  const std::string& model, const TravelerTypeMap* types, AugmentReport& report) {
    KnowledgeBase out = kb;
    for (const auto& [dname, domain] : extra.domains) {
        for (const auto& [eid, src] : domain) {
            ++report.entities;
            const auto where = dname + "/" + eid;
            try {
                const auto result = backend.generate({build_domain_review_prompt(eid, src.name, src.faqs), model});
                report.truncated += result.truncated;
                auto reviews = parse_domain_reviews(result.text);
                auto& target = out.domains[dname][eid];
                if (target.name.empty()) target.name = src.name;
                for (const auto& [fid, faq] : src.faqs) target.faqs.emplace(fid, faq);
                IdMap<Review> added;
                auto next = next_free_id(target.reviews);
                for (auto& r : reviews) added[std::to_string(next++)] = std::move(r);
                if (types) absorb(report.types, normalize_traveler_types(added, *types));
                report.added_reviews += added.size();
                for (auto& [rid, r] : added) target.reviews.emplace(rid, std::move(r));
            } catch (const Error& e) {
                report.failures.emplace_back(where, e.what());
            }
        }
    }
    return out;
}

// --- statistics --------------------------------------------------------------------

AugmentationStats augmentation_stats(const KnowledgeBase& original, const KnowledgeBase& augmented) {
    AugmentationStats s;
    std::size_t orig_chars = 0, added_chars = 0;
    for (const auto& [dname, domain] : original.domains) {
        for (const auto& [eid, entity] : domain) {
            const auto* aug = augmented.find_entity(dname, eid);
            for (const auto& [rid, review] : entity.reviews) {
                const auto where = dname + "/" + eid + "/review " + rid;
                if (aug == nullptr || !aug->reviews.contains(rid))
                    throw ValidationError("augmented knowledge is missing " + where);
                if (!(aug->reviews.at(rid) == review))
                    throw ValidationError("augmented knowledge changes " + where);
                ++s.original_by_type[review.traveler_type];
                for (const auto& [sid, sent] : review.sentences) {
                    (void)sid;
                    ++s.original_sentences;
                    orig_chars += text::utf8_length(sent);
                }
            }
        }
    }
    for (const auto& [dname, domain] : augmented.domains) {
        for (const auto& [eid, entity] : domain) {
            const auto* orig = original.find_entity(dname, eid);
            for (const auto& [rid, review] : entity.reviews) {
                if (orig != nullptr && orig->reviews.contains(rid)) continue;
                ++s.added_by_type[review.traveler_type];
                for (const auto& [sid, sent] : review.sentences) {
                    (void)sid;
                    ++s.added_sentences;
                    added_chars += text::utf8_length(sent);
                }
            }
        }
    }
    if (s.original_sentences > 0)
        s.original_avg_sentence_chars = static_cast<double>(orig_chars) / static_cast<double>(s.original_sentences);
    if (s.added_sentences > 0)
        s.added_avg_sentence_chars = static_cast<double>(added_chars) / static_cast<double>(s.added_sentences);
    return s;
}

nlohmann::ordered_json to_json(const AugmentationStats& s) {
    std::set<std::string> types;
    for (const auto& [t, n] : s.original_by_type) types.insert(t);
    for (const auto& [t, n] : s.added_by_type) types.insert(t);
    std::vector<std::string> order(types.begin(), types.end());
    auto count = [](const std::map<std::string, std::size_t>& m, const std::string& t) -> std::size_t {
        auto it = m.find(t);
        return it == m.end() ? 0 : it->second;
    };
    // Most common original types first, as in the usual count table.
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        const auto ka = std::make_pair(count(s.original_by_type, a), count(s.added_by_type, a));
        const auto kb = std::make_pair(count(s.original_by_type, b), count(s.added_by_type, b));
        return ka > kb;
    });
    auto rows = nlohmann::ordered_json::array();
    for (const auto& t : order)
        rows.push_back({{"traveler_type", t}, {"original", count(s.original_by_type, t)}, {"added", count(s.added_by_type, t)}});
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr); };
    return {{"traveler_types", std::move(rows)},
            {"original_sentences", s.original_sentences},
            {"added_sentences", s.added_sentences},
            {"original_avg_sentence_chars", opt(s.original_avg_sentence_chars)},
            {"added_avg_sentence_chars", opt(s.added_avg_sentence_chars)}};
}

}  // namespace sktod
