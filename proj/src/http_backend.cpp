#include <semaphore>
#include <thread>

#include <httplib.h>

#include "sktod/backend.hpp"

namespace sktod {

namespace {

using Clock = std::chrono::steady_clock;

// Splits "https://host:port/prefix" into ("https://host:port", "/prefix").
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto slash = endpoint.find('/', host_start);
    if (slash == std::string::npos) return {endpoint, ""};
    auto prefix = endpoint.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {endpoint.substr(0, slash), prefix};
}

nlohmann::json request_body(const GenerationRequest& req) {
    nlohmann::json body = {{"model", req.model},
                           {"max_tokens", req.bundle.max_tokens},
                           {"temperature", req.bundle.temperature}};
    if (req.bundle.kind == PromptKind::chat) {
        auto msgs = nlohmann::json::array();
        for (const auto& m : *req.bundle.messages)
            msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
        body["messages"] = std::move(msgs);
    } else {
        body["prompt"] = *req.bundle.text;
    }
    return body;
}

GenerationResult parse_response(const std::string& raw, PromptKind kind) {
    try {
        const auto j = nlohmann::json::parse(raw);
        const auto& choice = j.at("choices").at(0);
        GenerationResult r;
        if (kind == PromptKind::chat) {
            const auto& content = choice.at("message").at("content");
            r.text = content.is_null() ? "" : content.get<std::string>();
        } else {
            r.text = choice.at("text").get<std::string>();
        }
        const auto finish = choice.value("finish_reason", nlohmann::json());
        r.truncated = finish.is_string() && finish.get<std::string>() == "length";
        if (j.contains("usage")) {
            const auto& u = j.at("usage");
            if (u.contains("prompt_tokens")) r.prompt_tokens = u.at("prompt_tokens").get<int>();
            if (u.contains("completion_tokens")) r.completion_tokens = u.at("completion_tokens").get<int>();
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("unexpected response body: ") + e.what());
    }
}

}  // namespace

struct HttpBackend::State {
    explicit State(int bound) : slots(bound) {}
    std::counting_semaphore<1024> slots;
    std::mutex limiter;
    Clock::time_point next_start{};
};

HttpBackend::HttpBackend(HttpBackendConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleep_(std::move(sleeper)) {
    if (config_.concurrency < 1 || config_.concurrency > 1024)
        throw ValidationError("http backend: concurrency must be in [1, 1024]");
    if (config_.max_attempts < 1) throw ValidationError("http backend: max_attempts must be >= 1");
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    state_ = std::make_unique<State>(config_.concurrency);
}

HttpBackend::~HttpBackend() = default;

GenerationResult HttpBackend::generate(const GenerationRequest& request) {
    request.bundle.validate();
    if (config_.api_key.empty()) throw AuthError("no API key configured (set LLM_API_KEY)");

    state_->slots.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{state_->slots};

    const auto [base, prefix] = split_endpoint(config_.endpoint);
    const auto path = prefix + (request.bundle.kind == PromptKind::chat ? config_.chat_path : config_.completion_path);
    const auto body = request_body(request).dump();
    const httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key}};

    std::string last_failure;
    bool last_was_rate_limit = false;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        if (config_.requests_per_minute > 0) {
            const auto spacing = std::chrono::duration_cast<Clock::duration>(
                std::chrono::duration<double>(60.0 / config_.requests_per_minute));
            Clock::time_point start;
            {
                std::lock_guard lock(state_->limiter);
                start = std::max(Clock::now(), state_->next_start);
                state_->next_start = start + spacing;
            }
            const auto wait = start - Clock::now();
            if (wait > Clock::duration::zero())
                sleep_(std::chrono::ceil<std::chrono::milliseconds>(wait));
        }

        httplib::Client client(base);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        client.set_write_timeout(config_.timeout);
        auto res = client.Post(path, headers, body, "application/json");

        if (!res) {
            last_was_rate_limit = false;
            last_failure = "transport error: " + httplib::to_string(res.error());
        } else if (res->status == 200) {
            return parse_response(res->body, request.bundle.kind);
        } else if (res->status == 401 || res->status == 403) {
            throw AuthError("API key rejected (HTTP " + std::to_string(res->status) + ")");
        } else if (res->status == 429) {
            last_was_rate_limit = true;
            last_failure = "HTTP 429";
        } else if (res->status >= 500) {
            last_was_rate_limit = false;
            last_failure = "HTTP " + std::to_string(res->status);
        } else {
            throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
        }
        if (attempt < config_.max_attempts) sleep_(config_.backoff_base * (1LL << (attempt - 1)));
    }
    const auto attempts = std::to_string(config_.max_attempts);
    if (last_was_rate_limit) throw RateLimitError("rate limited: gave up after " + attempts + " attempts");
    throw TransportError(last_failure + " (gave up after " + attempts + " attempts)");
}

}  // namespace sktod
