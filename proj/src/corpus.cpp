#include "sktod/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "sktod/errors.hpp"
#include "sktod/json_io.hpp"
#include "sktod/text.hpp"

namespace sktod {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string_view strip_zeros(std::string_view s) {
    std::size_t i = 0;
    while (i + 1 < s.size() && s[i] == '0') ++i;
    return s.substr(i);
}

bool is_canonical_id(std::string_view s) {
    return text::is_decimal_id(s) && (s.size() == 1 || s[0] != '0');
}

// Accepts either a decimal string or a non-negative integer.
std::string id_from_json(const json& j, const std::string& where) {
    if (j.is_number_unsigned()) return std::to_string(j.get<unsigned long long>());
    if (j.is_number_integer()) {
        auto v = j.get<long long>();
        if (v < 0) throw ParseError(where + ": id must be non-negative, got " + std::to_string(v));
        return std::to_string(v);
    }
    if (j.is_string()) {
        auto s = j.get<std::string>();
        if (!is_canonical_id(s)) throw ParseError(where + ": id must be a decimal string, got \"" + s + "\"");
        return s;
    }
    throw ParseError(where + ": id must be a string or integer");
}

const json& require(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw ParseError((where.empty() ? std::string() : where + ": ") + "missing field \"" + key + "\"");
    return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
    const auto& v = require(obj, key, where);
    if (!v.is_string()) throw ParseError((where.empty() ? std::string() : where + "/") + key + ": expected a string");
    return v.get<std::string>();
}

void check_key(const std::string& key, const std::string& where) {
    if (!is_canonical_id(key)) throw ParseError(where + ": key \"" + key + "\" is not a decimal id");
}

json id_to_json(const std::string& id) {
    if (is_canonical_id(id) && id.size() < 19) return json(std::stoull(id));
    return json(id);
}

}  // namespace

bool NumericIdLess::operator()(std::string_view a, std::string_view b) const {
    const bool na = text::is_decimal_id(a);
    const bool nb = text::is_decimal_id(b);
    if (na && nb) {
        auto sa = strip_zeros(a);
        auto sb = strip_zeros(b);
        if (sa.size() != sb.size()) return sa.size() < sb.size();
        if (sa != sb) return sa < sb;
        return a < b;
    }
    if (na != nb) return na;
    return a < b;
}

// --- json_io ------------------------------------------------------------------

nlohmann::json parse_json_strict(std::string_view text_in, std::string_view source) {
    struct Frame {
        bool is_object;
        std::set<std::string> keys;
        std::string current;
    };
    std::vector<Frame> stack;
    auto path = [&stack]() {
        std::string p;
        for (const auto& f : stack) {
            if (!f.current.empty()) p += "/" + f.current;
        }
        return p.empty() ? std::string("/") : p;
    };
    json::parser_callback_t cb = [&](int /*depth*/, json::parse_event_t event, json& parsed) {
        switch (event) {
        case json::parse_event_t::object_start:
            stack.push_back({true, {}, {}});
            break;
        case json::parse_event_t::array_start:
            stack.push_back({false, {}, {}});
            break;
        case json::parse_event_t::object_end:
        case json::parse_event_t::array_end:
            if (!stack.empty()) stack.pop_back();
            break;
        case json::parse_event_t::key: {
            auto key = parsed.get<std::string>();
            auto& top = stack.back();
            if (!top.keys.insert(key).second) {
                top.current.clear();
                throw ParseError(std::string(source) + ": duplicate key \"" + key + "\" at " + path());
            }
            top.current = key;
            break;
        }
        case json::parse_event_t::value:
            break;
        }
        return true;
    };
    try {
        return json::parse(text_in.begin(), text_in.end(), cb);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text_in.size(); ++i) {
            if (text_in[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(std::string(source) + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                         e.what());
    }
}

// --- files --------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
    return parse_json_strict(read_file(path), path.string());
}

// --- knowledge ------------------------------------------------------------------

KnowledgeCounts KnowledgeBase::counts() const {
    KnowledgeCounts c;
    for (const auto& [dname, entities] : domains) {
        for (const auto& [eid, e] : entities) {
            ++c.entities;
            c.reviews += e.reviews.size();
            c.faqs += e.faqs.size();
            for (const auto& [rid, r] : e.reviews) c.sentences += r.sentences.size();
        }
    }
    return c;
}

const Entity* KnowledgeBase::find_entity(std::string_view domain, std::string_view entity_id) const {
    auto d = domains.find(std::string(domain));
    if (d == domains.end()) return nullptr;
    auto e = d->second.find(entity_id);
    return e == d->second.end() ? nullptr : &e->second;
}

std::string_view to_string(DocType t) { return t == DocType::review ? "review" : "faq"; }

DocType parse_doc_type(std::string_view s) {
    if (s == "review") return DocType::review;
    if (s == "faq") return DocType::faq;
    throw ParseError("unknown doc_type \"" + std::string(s) + "\"");
}

KnowledgeBase parse_knowledge(const json& doc) {
    if (!doc.is_object()) throw ParseError("knowledge: top level must be an object of domains");
    KnowledgeBase kb;
    for (const auto& [dname, entities] : doc.items()) {
        if (!entities.is_object()) throw ParseError(dname + ": domain must be an object");
        auto& domain = kb.domains[dname];
        for (const auto& [eid, ej] : entities.items()) {
            const std::string where = dname + "/" + eid;
            check_key(eid, where);
            if (!ej.is_object()) throw ParseError(where + ": entity must be an object");
            Entity entity;
            entity.name = require_string(ej, "name", where);
            if (auto rit = ej.find("reviews"); rit != ej.end() && !rit->is_null()) {
                if (!rit->is_object()) throw ParseError(where + "/reviews: expected an object");
                for (const auto& [rid, rj] : rit->items()) {
                    const std::string rwhere = where + "/reviews/" + rid;
                    check_key(rid, rwhere);
                    Review review;
                    review.traveler_type = require_string(rj, "traveler_type", rwhere);
                    const auto& sj = require(rj, "sentences", rwhere);
                    if (!sj.is_object()) throw ParseError(rwhere + "/sentences: expected an object");
                    for (const auto& [sid, st] : sj.items()) {
                        check_key(sid, rwhere + "/sentences/" + sid);
                        if (!st.is_string()) throw ParseError(rwhere + "/sentences/" + sid + ": expected a string");
                        review.sentences.emplace(sid, st.get<std::string>());
                    }
                    entity.reviews.emplace(rid, std::move(review));
                }
            }
            if (auto fit = ej.find("faqs"); fit != ej.end() && !fit->is_null()) {
                if (!fit->is_object()) throw ParseError(where + "/faqs: expected an object");
                for (const auto& [fid, fj] : fit->items()) {
                    const std::string fwhere = where + "/faqs/" + fid;
                    check_key(fid, fwhere);
                    entity.faqs.emplace(fid, Faq{require_string(fj, "question", fwhere),
                                                 require_string(fj, "answer", fwhere)});
                }
            }
            domain.emplace(eid, std::move(entity));
        }
    }
    validate_knowledge(kb);
    return kb;
}

void validate_knowledge(const KnowledgeBase& kb) {
    for (const auto& [dname, entities] : kb.domains) {
        for (const auto& [eid, e] : entities) {
            const std::string where = dname + "/" + eid;
            if (text::trim(e.name).empty()) throw ValidationError(where + ": entity name is empty");
            for (const auto& [rid, r] : e.reviews) {
                const std::string rwhere = where + "/reviews/" + rid;
                if (text::trim(r.traveler_type).empty()) throw ValidationError(rwhere + ": empty traveler_type");
                if (r.sentences.empty()) throw ValidationError(rwhere + ": review has no sentences");
                std::size_t expected = 0;
                for (const auto& [sid, s] : r.sentences) {
                    (void)s;
                    if (sid != std::to_string(expected))
                        throw ValidationError(rwhere + ": sentence ids must be contiguous from 0, found \"" + sid +
                                              "\" where \"" + std::to_string(expected) + "\" was expected");
                    ++expected;
                }
            }
            for (const auto& [fid, f] : e.faqs) {
                if (text::trim(f.question).empty() || text::trim(f.answer).empty())
                    throw ValidationError(where + "/faqs/" + fid + ": question and answer must be non-empty");
            }
        }
    }
}

KnowledgeBase load_knowledge(const std::filesystem::path& path) {
    auto doc = read_json_file(path);
    try {
        return parse_knowledge(doc);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

ordered_json reviews_to_json(const IdMap<Review>& reviews) {
    ordered_json out = ordered_json::object();
    for (const auto& [rid, r] : reviews) {
        ordered_json rj = ordered_json::object();
        rj["traveler_type"] = r.traveler_type;
        ordered_json sj = ordered_json::object();
        for (const auto& [sid, s] : r.sentences) sj[sid] = s;
        rj["sentences"] = std::move(sj);
        out[rid] = std::move(rj);
    }
    return out;
}

ordered_json knowledge_to_json(const KnowledgeBase& kb) {
    ordered_json out = ordered_json::object();
    for (const auto& [dname, entities] : kb.domains) {
        ordered_json dj = ordered_json::object();
        for (const auto& [eid, e] : entities) {
            ordered_json ej = ordered_json::object();
            ej["name"] = e.name;
            ej["reviews"] = reviews_to_json(e.reviews);
            ordered_json fj = ordered_json::object();
            for (const auto& [fid, f] : e.faqs) fj[fid] = ordered_json{{"question", f.question}, {"answer", f.answer}};
            ej["faqs"] = std::move(fj);
            dj[eid] = std::move(ej);
        }
        out[dname] = std::move(dj);
    }
    return out;
}

void save_knowledge(const KnowledgeBase& kb, const std::filesystem::path& path) {
    write_file(path, knowledge_to_json(kb).dump(2) + "\n");
}

// --- dialogues ----------------------------------------------------------------

std::string DialogueInstance::last_user_utterance() const {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
        if (it->speaker == Speaker::user) return it->text;
    }
    return {};
}

std::vector<std::vector<Turn>> load_logs(const std::filesystem::path& path) {
    auto doc = read_json_file(path);
    if (!doc.is_array()) throw ParseError(path.string() + ": logs file must be a JSON array");
    std::vector<std::vector<Turn>> logs;
    logs.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& dj = doc[i];
        const std::string where = path.string() + "[" + std::to_string(i) + "]";
        if (!dj.is_array()) throw ParseError(where + ": dialogue must be an array of turns");
        std::vector<Turn> turns;
        for (std::size_t t = 0; t < dj.size(); ++t) {
            const std::string twhere = where + "[" + std::to_string(t) + "]";
            if (!dj[t].is_object()) throw ParseError(twhere + ": malformed turn");
            auto speaker = require_string(dj[t], "speaker", twhere);
            Turn turn;
            if (speaker == "U") turn.speaker = Speaker::user;
            else if (speaker == "S") turn.speaker = Speaker::system;
            else throw ParseError(twhere + ": speaker must be \"U\" or \"S\", got \"" + speaker + "\"");
            turn.text = require_string(dj[t], "text", twhere);
            turns.push_back(std::move(turn));
        }
        logs.push_back(std::move(turns));
    }
    return logs;
}

KnowledgeRef parse_ref(const json& j) {
    if (!j.is_object()) throw ParseError("knowledge ref must be an object");
    KnowledgeRef ref;
    ref.domain = require_string(j, "domain", "ref");
    ref.entity_id = id_from_json(require(j, "entity_id", "ref"), "ref/entity_id");
    ref.doc_type = parse_doc_type(require_string(j, "doc_type", "ref"));
    ref.doc_id = id_from_json(require(j, "doc_id", "ref"), "ref/doc_id");
    auto sit = j.find("sent_id");
    if (sit != j.end() && !sit->is_null()) ref.sent_id = id_from_json(*sit, "ref/sent_id");
    if (ref.doc_type == DocType::review && !ref.sent_id) throw ParseError("review ref requires sent_id");
    if (ref.doc_type == DocType::faq && ref.sent_id) throw ParseError("faq ref must not carry sent_id");
    return ref;
}

ordered_json ref_to_json(const KnowledgeRef& ref) {
    ordered_json j = ordered_json::object();
    j["domain"] = ref.domain;
    j["entity_id"] = id_to_json(ref.entity_id);
    j["doc_type"] = std::string(to_string(ref.doc_type));
    j["doc_id"] = id_to_json(ref.doc_id);
    if (ref.sent_id) j["sent_id"] = id_to_json(*ref.sent_id);
    return j;
}

namespace {

std::vector<KnowledgeRef> parse_refs(const json& entry, const std::string& where) {
    std::vector<KnowledgeRef> refs;
    auto kit = entry.find("knowledge");
    if (kit == entry.end() || kit->is_null()) return refs;
    if (!kit->is_array()) throw ParseError(where + "knowledge: expected an array");
    for (std::size_t k = 0; k < kit->size(); ++k) {
        try {
            refs.push_back(parse_ref((*kit)[k]));
        } catch (const ParseError& e) {
            throw ParseError(where + "knowledge[" + std::to_string(k) + "]: " + e.what());
        }
    }
    return refs;
}

bool require_bool(const json& obj, const char* key, const std::string& where) {
    const auto& v = require(obj, key, where);
    if (!v.is_boolean()) throw ParseError((where.empty() ? std::string() : where + "/") + key + ": expected a boolean");
    return v.get<bool>();
}

}  // namespace

std::vector<Label> load_labels(const std::filesystem::path& path) {
    auto doc = read_json_file(path);
    if (!doc.is_array()) throw ParseError(path.string() + ": labels file must be a JSON array");
    std::vector<Label> labels;
    labels.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string where = path.string() + "[" + std::to_string(i) + "]";
        const auto& lj = doc[i];
        if (!lj.is_object()) throw ParseError(where + ": label must be an object");
        Label label;
        label.target = require_bool(lj, "target", where);
        label.refs = parse_refs(lj, where + "/");
        if (label.target) {
            label.response = require_string(lj, "response", where);
            if (label.refs.empty()) throw ValidationError(where + ": knowledge-seeking label without knowledge refs");
        } else if (!label.refs.empty()) {
            throw ValidationError(where + ": non-seeking label carries knowledge refs");
        }
        labels.push_back(std::move(label));
    }
    return labels;
}

std::vector<DialogueInstance> load_dialogues(const std::filesystem::path& logs_path,
                                             const std::optional<std::filesystem::path>& labels_path) {
    auto logs = load_logs(logs_path);
    std::vector<Label> labels;
    if (labels_path) {
        labels = load_labels(*labels_path);
        if (labels.size() != logs.size())
            throw ValidationError("length mismatch: " + std::to_string(logs.size()) + " logs vs " +
                                  std::to_string(labels.size()) + " labels");
    }
    std::vector<DialogueInstance> out;
    out.reserve(logs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) {
        DialogueInstance inst;
        inst.id = i;
        inst.turns = std::move(logs[i]);
        if (labels_path) {
            inst.label = std::move(labels[i]);
            if (inst.label->target && (inst.turns.empty() || inst.turns.back().speaker != Speaker::user))
                throw ValidationError("instance " + std::to_string(i) +
                                      ": knowledge-seeking dialogue must end with a user turn");
        }
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<Prediction> parse_predictions(const json& doc) {
    if (!doc.is_array()) throw ParseError("predictions must be a JSON array");
    std::vector<Prediction> preds;
    preds.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string where = "entry " + std::to_string(i);
        try {
            const auto& pj = doc[i];
            if (!pj.is_object()) throw ParseError("expected an object");
            Prediction p;
            p.id = i;
            p.target = require_bool(pj, "target", "");
            if (p.target) {
                p.refs = parse_refs(pj, "");
                auto rit = pj.find("response");
                if (rit != pj.end()) {
                    if (!rit->is_string()) throw ParseError("response: expected a string");
                    p.response = rit->get<std::string>();
                }
            }
            if (auto tit = pj.find("truncated"); tit != pj.end()) {
                if (!tit->is_boolean()) throw ParseError("truncated: expected a boolean");
                p.truncated = tit->get<bool>();
            }
            preds.push_back(std::move(p));
        } catch (const ParseError& e) {
            throw ParseError("predictions " + where + ": " + e.what());
        }
    }
    return preds;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    auto doc = read_json_file(path);
    try {
        return parse_predictions(doc);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

ordered_json predictions_to_json(const std::vector<Prediction>& preds) {
    ordered_json out = ordered_json::array();
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        if (p.id != i)
            throw ValidationError("prediction ids must be contiguous from 0; position " + std::to_string(i) +
                                  " holds id " + std::to_string(p.id));
        ordered_json pj = ordered_json::object();
        pj["target"] = p.target;
        if (p.target) {
            ordered_json refs = ordered_json::array();
            for (const auto& r : p.refs) refs.push_back(ref_to_json(r));
            pj["knowledge"] = std::move(refs);
            pj["response"] = p.response;
        }
        if (p.truncated) pj["truncated"] = true;
        out.push_back(std::move(pj));
    }
    return out;
}

void write_predictions(const std::vector<Prediction>& preds, const std::filesystem::path& path) {
    write_file(path, predictions_to_json(preds).dump(2) + "\n");
}

std::vector<Prediction> labels_as_predictions(const std::vector<DialogueInstance>& instances) {
    std::vector<Prediction> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) {
        Prediction p;
        p.id = inst.id;
        if (inst.label) {
            p.target = inst.label->target;
            p.refs = inst.label->refs;
            p.response = inst.label->response;
        }
        out.push_back(std::move(p));
    }
    return out;
}

// --- resolution and merging ---------------------------------------------------------

Snippet resolve_ref(const KnowledgeBase& kb, const KnowledgeRef& ref) {
    auto d = kb.domains.find(ref.domain);
    if (d == kb.domains.end()) throw ResolutionError("domain not found: \"" + ref.domain + "\"");
    auto e = d->second.find(ref.entity_id);
    if (e == d->second.end())
        throw ResolutionError("entity not found: " + ref.domain + "/" + ref.entity_id);
    const Entity& entity = e->second;
    const std::string where = ref.domain + "/" + ref.entity_id;
    if (ref.doc_type == DocType::faq) {
        auto f = entity.faqs.find(ref.doc_id);
        if (f == entity.faqs.end()) throw ResolutionError("faq not found: " + where + "/faqs/" + ref.doc_id);
        return {DocType::faq, f->second.question + " " + f->second.answer};
    }
    auto r = entity.reviews.find(ref.doc_id);
    if (r == entity.reviews.end()) throw ResolutionError("review not found: " + where + "/reviews/" + ref.doc_id);
    if (!ref.sent_id) throw ResolutionError("review ref without sentence id: " + where + "/reviews/" + ref.doc_id);
    auto s = r->second.sentences.find(*ref.sent_id);
    if (s == r->second.sentences.end())
        throw ResolutionError("sentence not found: " + where + "/reviews/" + ref.doc_id + "/" + *ref.sent_id);
    return {DocType::review, s->second};
}

std::vector<Snippet> resolve_refs(const KnowledgeBase& kb, const std::vector<KnowledgeRef>& refs) {
    std::vector<Snippet> out;
    out.reserve(refs.size());
    for (const auto& r : refs) out.push_back(resolve_ref(kb, r));
    return out;
}

namespace {

template <typename T>
void append_renumbered(IdMap<T>& into, const IdMap<T>& extra) {
    for (const auto& [id, value] : extra) {
        if (!into.contains(id)) {
            into.emplace(id, value);
            continue;
        }
        into.emplace(std::to_string(next_free_id(into)), value);
    }
}

}  // namespace

KnowledgeBase merge_knowledge(const KnowledgeBase& base, const KnowledgeBase& extra) {
    KnowledgeBase merged = base;
    for (const auto& [dname, entities] : extra.domains) {
        auto& domain = merged.domains[dname];
        for (const auto& [eid, e] : entities) {
            auto it = domain.find(eid);
            if (it == domain.end()) {
                if (text::trim(e.name).empty())
                    throw ValidationError("merge: entity " + dname + "/" + eid + " is new but has no name");
                domain.emplace(eid, e);
                continue;
            }
            append_renumbered(it->second.reviews, e.reviews);
            append_renumbered(it->second.faqs, e.faqs);
        }
    }
    return merged;
}

}  // namespace sktod
