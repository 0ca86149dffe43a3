#include <fstream>

#include <openssl/evp.h>

#include "sktod/backend.hpp"
#include "sktod/json_io.hpp"
#include "sktod/text.hpp"

namespace sktod {

std::string request_hash(const GenerationRequest& r) {
    const auto canonical = to_json(r).dump();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

Cassette::Cassette(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(path_)) return;
    std::ifstream in(path_);
    if (!in) throw IoError("cannot open cassette " + path_.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const std::string where = path_.string() + ":" + std::to_string(lineno);
        const auto j = parse_json_strict(line, where);
        std::string hash;
        Entry entry;
        try {
            hash = j.at("hash").get<std::string>();
            entry = {request_from_json(j.at("request")), result_from_json(j.at("result"))};
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(where + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError(where + ": " + e.what());
        }
        auto [it, inserted] = entries_.emplace(hash, entry);
        if (!inserted && !(it->second.request == entry.request))
            throw CassetteError(where + ": hash " + hash + " already used by a different request");
    }
}

std::optional<GenerationResult> Cassette::find(const GenerationRequest& request) const {
    const auto hash = request_hash(request);
    std::lock_guard lock(mutex_);
    auto it = entries_.find(hash);
    if (it == entries_.end()) return std::nullopt;
    if (!(it->second.request == request))
        throw CassetteError("cassette " + path_.string() + ": hash " + hash + " maps to a different request");
    return it->second.result;
}

void Cassette::record(const GenerationRequest& request, const GenerationResult& result) {
    const auto hash = request_hash(request);
    std::lock_guard lock(mutex_);
    auto it = entries_.find(hash);
    if (it != entries_.end()) {
        if (!(it->second.request == request))
            throw CassetteError("cassette " + path_.string() + ": hash collision on " + hash +
                                " between distinct requests; refusing to write");
        return;
    }
    nlohmann::ordered_json line = {{"hash", hash}, {"request", to_json(request)}, {"result", to_json(result)}};
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot append to cassette " + path_.string());
    out << line.dump() << "\n";
    out.flush();
    if (!out) throw IoError("write failed on cassette " + path_.string());
    entries_.emplace(hash, Entry{request, result});
}

std::size_t Cassette::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void record(const GenerationRequest& request, const GenerationResult& result, const std::filesystem::path& cassette) {
    Cassette(cassette).record(request, result);
}

ReplayBackend::ReplayBackend(const std::filesystem::path& cassette) : cassette_(cassette) {
    if (!std::filesystem::exists(cassette)) throw IoError("cassette not found: " + cassette.string());
}

GenerationResult ReplayBackend::generate(const GenerationRequest& request) {
    auto hit = cassette_.find(request);
    if (!hit) throw ReplayMissError("request not in cassette " + cassette_.path().string() + " (hash " +
                                    request_hash(request) + ")");
    return *hit;
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, const std::filesystem::path& cassette)
    : inner_(std::move(inner)), cassette_(cassette) {}

GenerationResult RecordingBackend::generate(const GenerationRequest& request) {
    if (auto hit = cassette_.find(request)) return *hit;
    auto result = inner_->generate(request);
    cassette_.record(request, result);
    return result;
}

}  // namespace sktod
