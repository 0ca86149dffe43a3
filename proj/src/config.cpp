#include "sktod/config.hpp"

#include <set>

#include "sktod/errors.hpp"

namespace sktod {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (!known.contains(k)) throw ValidationError(where + ": unknown key \"" + k + "\"");
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& into, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(where + ": \"" + key + "\" has the wrong type");
    }
}

void read_path(const nlohmann::json& j, const char* key, std::optional<std::filesystem::path>& into,
               const std::filesystem::path& base) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    if (!j.at(key).is_string()) throw ValidationError(std::string("config: \"") + key + "\" must be a path string");
    std::filesystem::path p = j.at(key).get<std::string>();
    into = p.is_absolute() ? p : base / p;
}

}  // namespace

AppConfig AppConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ValidationError("config: top level must be an object");
    reject_unknown(j,
                   {"knowledge", "logs", "labels", "train_logs", "train_labels", "lexicon", "traveler_types",
                    "backend"},
                   "config");
    AppConfig c;
    read_path(j, "knowledge", c.knowledge, base_dir);
    read_path(j, "logs", c.logs, base_dir);
    read_path(j, "labels", c.labels, base_dir);
    read_path(j, "train_logs", c.train_logs, base_dir);
    read_path(j, "train_labels", c.train_labels, base_dir);
    read_path(j, "lexicon", c.lexicon, base_dir);
    read_path(j, "traveler_types", c.traveler_types, base_dir);
    if (j.contains("backend")) {
        const auto& b = j.at("backend");
        const std::string where = "config.backend";
        if (!b.is_object()) throw ValidationError(where + " must be an object");
        reject_unknown(b,
                       {"endpoint", "chat_path", "completion_path", "chat_model", "completion_model",
                        "requests_per_minute", "concurrency", "max_tokens", "max_attempts", "timeout_seconds"},
                       where);
        auto& s = c.backend;
        read(b, "endpoint", s.endpoint, where);
        read(b, "chat_path", s.chat_path, where);
        read(b, "completion_path", s.completion_path, where);
        read(b, "chat_model", s.chat_model, where);
        read(b, "completion_model", s.completion_model, where);
        read(b, "requests_per_minute", s.requests_per_minute, where);
        read(b, "concurrency", s.concurrency, where);
        read(b, "max_tokens", s.max_tokens, where);
        read(b, "max_attempts", s.max_attempts, where);
        read(b, "timeout_seconds", s.timeout_seconds, where);
        if (s.concurrency < 1) throw ValidationError(where + ".concurrency must be >= 1");
        if (s.max_tokens < 1) throw ValidationError(where + ".max_tokens must be >= 1");
        if (s.max_attempts < 1) throw ValidationError(where + ".max_attempts must be >= 1");
    }
    return c;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
    return from_json(read_json_file(path), path.parent_path());
}

HttpBackendConfig http_config(const BackendSettings& s, std::string api_key) {
    HttpBackendConfig h;
    h.endpoint = s.endpoint;
    h.chat_path = s.chat_path;
    h.completion_path = s.completion_path;
    h.api_key = std::move(api_key);
    h.requests_per_minute = s.requests_per_minute;
    h.concurrency = s.concurrency;
    h.max_attempts = s.max_attempts;
    h.timeout = std::chrono::seconds(s.timeout_seconds);
    return h;
}

}  // namespace sktod
