#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "sktod/errors.hpp"
#include "sktod/prompting.hpp"

namespace sktod {

class BackendError : public Error {
public:
    using Error::Error;
};
class AuthError : public BackendError {
public:
    using BackendError::BackendError;
};
class RateLimitError : public BackendError {
public:
    using BackendError::BackendError;
};
class TransportError : public BackendError {
public:
    using BackendError::BackendError;
};
class ReplayMissError : public BackendError {
public:
    using BackendError::BackendError;
};
class CassetteError : public BackendError {
public:
    using BackendError::BackendError;
};

struct GenerationRequest {
    PromptBundle bundle;
    std::string model;

    bool operator==(const GenerationRequest&) const = default;
};

struct GenerationResult {
    std::string text;
    bool truncated = false;  // provider stopped on the length limit
    std::optional<int> prompt_tokens;
    std::optional<int> completion_tokens;

    bool operator==(const GenerationResult&) const = default;
};

nlohmann::ordered_json to_json(const GenerationRequest& r);
GenerationRequest request_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const GenerationResult& r);
GenerationResult result_from_json(const nlohmann::json& j);

// Hex SHA-256 of the canonical request JSON.
std::string request_hash(const GenerationRequest& r);

// Implementations must tolerate concurrent generate() calls.
class Backend {
public:
    virtual ~Backend() = default;
    virtual GenerationResult generate(const GenerationRequest& request) = 0;
    virtual std::string name() const = 0;
};

inline constexpr std::string_view kMostFrequentQuestion = "Would you like to know more about them?";

// Deterministic offline backend. Answers with the first sentence of the first
// knowledge snippet it can find in the prompt followed by the MFQ, shaped to
// whichever prompt family it recognises.
class MockBackend final : public Backend {
public:
    GenerationResult generate(const GenerationRequest& request) override;
    std::string name() const override { return "mock"; }
};

// Append-only JSON-lines store of {hash, request, result}.
class Cassette {
public:
    explicit Cassette(std::filesystem::path path);

    std::optional<GenerationResult> find(const GenerationRequest& request) const;
    // Appends unless an identical request is already stored. Throws
    // CassetteError if the hash is taken by a different request.
    void record(const GenerationRequest& request, const GenerationResult& result);
    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

private:
    struct Entry {
        GenerationRequest request;
        GenerationResult result;
    };
    std::filesystem::path path_;
    std::map<std::string, Entry> entries_;
    mutable std::mutex mutex_;
};

void record(const GenerationRequest& request, const GenerationResult& result, const std::filesystem::path& cassette);

class ReplayBackend final : public Backend {
public:
    explicit ReplayBackend(const std::filesystem::path& cassette);
    GenerationResult generate(const GenerationRequest& request) override;
    std::string name() const override { return "replay"; }

private:
    Cassette cassette_;
};

class RecordingBackend final : public Backend {
public:
    RecordingBackend(std::shared_ptr<Backend> inner, const std::filesystem::path& cassette);
    GenerationResult generate(const GenerationRequest& request) override;
    std::string name() const override { return "record(" + inner_->name() + ")"; }

private:
    std::shared_ptr<Backend> inner_;
    Cassette cassette_;
};

struct HttpBackendConfig {
    std::string endpoint = "https://api.openai.com";
    std::string chat_path = "/v1/chat/completions";
    std::string completion_path = "/v1/completions";
    std::string api_key;  // usually filled from LLM_API_KEY
    double requests_per_minute = 60.0;  // <= 0 disables the limiter
    int concurrency = 4;
    int max_attempts = 5;
    std::chrono::milliseconds backoff_base{1000};
    std::chrono::seconds timeout{120};
};

// OpenAI-style chat/completion client with retry, rate limiting and a bound
// on in-flight requests.
class HttpBackend final : public Backend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpBackend(HttpBackendConfig config, Sleeper sleeper = {});
    ~HttpBackend() override;
    GenerationResult generate(const GenerationRequest& request) override;
    std::string name() const override { return "http"; }

private:
    struct State;
    HttpBackendConfig config_;
    Sleeper sleep_;
    std::unique_ptr<State> state_;
};

// Reads LLM_API_KEY; throws AuthError when it is unset or empty.
std::string api_key_from_env();

}  // namespace sktod
