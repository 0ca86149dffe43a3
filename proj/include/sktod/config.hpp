#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "sktod/backend.hpp"

namespace sktod {

struct BackendSettings {
    std::string endpoint = "https://api.openai.com";
    std::string chat_path = "/v1/chat/completions";
    std::string completion_path = "/v1/completions";
    std::string chat_model = "gpt-3.5-turbo";
    std::string completion_model = "text-davinci-003";
    double requests_per_minute = 60.0;
    int concurrency = 4;
    int max_tokens = kDefaultMaxTokens;
    int max_attempts = 5;
    int timeout_seconds = 120;
};

struct AppConfig {
    std::optional<std::filesystem::path> knowledge;
    std::optional<std::filesystem::path> logs;
    std::optional<std::filesystem::path> labels;
    std::optional<std::filesystem::path> train_logs;
    std::optional<std::filesystem::path> train_labels;
    std::optional<std::filesystem::path> lexicon;
    std::optional<std::filesystem::path> traveler_types;
    BackendSettings backend;

    // Relative paths are resolved against base_dir. Unknown keys are errors.
    static AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    static AppConfig load(const std::filesystem::path& path);
};

HttpBackendConfig http_config(const BackendSettings& s, std::string api_key);

}  // namespace sktod
