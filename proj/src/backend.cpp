#include "chatagri/backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <thread>

#include <openssl/evp.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "chatagri/error.hpp"

namespace chatagri {

using nlohmann::json;

Role parse_role(std::string_view name) {
    if (name == "system") {
        return Role::system;
    }
    if (name == "user") {
        return Role::user;
    }
    throw ParseError("unknown message role '" + std::string(name) + "'");
}

std::string to_string(Role role) {
    return role == Role::system ? "system" : "user";
}

TranscriptSource parse_transcript_source(std::string_view name) {
    if (name == "live") {
        return TranscriptSource::live;
    }
    if (name == "cache") {
        return TranscriptSource::cache;
    }
    if (name == "mock") {
        return TranscriptSource::mock;
    }
    throw ParseError("unknown transcript source '" + std::string(name) + "'");
}

std::string to_string(TranscriptSource source) {
    switch (source) {
        case TranscriptSource::live:
            return "live";
        case TranscriptSource::cache:
            return "cache";
        default:
            return "mock";
    }
}

void validate_request(const CompletionRequest& request) {
    if (request.model.empty()) {
        throw Error("completion request: empty model id");
    }
    if (request.temperature < 0.0) {
        throw Error("completion request: negative temperature");
    }
    size_t users = 0;
    size_t systems = 0;
    for (const auto& m : request.messages) {
        (m.role == Role::user ? users : systems) += 1;
    }
    if (users != 1 || systems > 1 || request.messages.size() > 2) {
        throw Error(
            "completion request: each call is a fresh conversation with "
            "exactly one user message and at most one system message");
    }
    if (request.messages.size() == 2 &&
        request.messages.front().role != Role::system) {
        throw Error("completion request: system message must come first");
    }
    if (request.max_output_tokens && *request.max_output_tokens <= 0) {
        throw Error("completion request: max_output_tokens must be positive");
    }
}

CompletionRequest make_request(std::string model, std::string user_content,
                               std::string system_content, double temperature,
                               std::optional<int> max_output_tokens) {
    CompletionRequest request;
    request.model = std::move(model);
    if (!system_content.empty()) {
        request.messages.push_back({Role::system, std::move(system_content)});
    }
    request.messages.push_back({Role::user, std::move(user_content)});
    request.temperature = temperature;
    request.max_output_tokens = max_output_tokens;
    return request;
}

CompletionRequest make_request(const InferenceOptions& options,
                               std::string user_content) {
    return make_request(options.model, std::move(user_content),
                        options.system_message, options.temperature,
                        options.max_output_tokens);
}

json to_json(const CompletionRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    json doc;
    doc["model"] = request.model;
    doc["messages"] = std::move(messages);
    doc["temperature"] = request.temperature;
    if (request.max_output_tokens) {
        doc["max_output_tokens"] = *request.max_output_tokens;
    }
    return doc;
}

CompletionRequest request_from_json(const json& doc) {
    CompletionRequest request;
    try {
        request.model = doc.at("model").get<std::string>();
        for (const auto& m : doc.at("messages")) {
            request.messages.push_back(
                {parse_role(m.at("role").get<std::string>()),
                 m.at("content").get<std::string>()});
        }
        request.temperature = doc.value("temperature", 0.0);
        if (doc.contains("max_output_tokens")) {
            request.max_output_tokens = doc["max_output_tokens"].get<int>();
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string{"bad completion request: "} + e.what());
    }
    return request;
}

json to_json(const ModelTranscript& transcript) {
    json doc;
    doc["request"] = to_json(transcript.request);
    doc["response_text"] = transcript.response_text;
    doc["source"] = to_string(transcript.source);
    doc["cache_key"] = transcript.cache_key;
    if (transcript.latency_ms) {
        doc["latency_ms"] = *transcript.latency_ms;
    }
    doc["timestamp"] = transcript.timestamp;
    return doc;
}

ModelTranscript transcript_from_json(const json& doc) {
    ModelTranscript transcript;
    try {
        transcript.request = request_from_json(doc.at("request"));
        transcript.response_text = doc.at("response_text").get<std::string>();
        transcript.source =
            parse_transcript_source(doc.at("source").get<std::string>());
        transcript.cache_key = doc.at("cache_key").get<std::string>();
        if (doc.contains("latency_ms")) {
            transcript.latency_ms = doc["latency_ms"].get<double>();
        }
        transcript.timestamp = doc.at("timestamp").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string{"bad transcript: "} + e.what());
    }
    return transcript;
}

std::string cache_key(const CompletionRequest& request) {
    // nlohmann objects serialize with sorted keys, so dump() is canonical.
    const std::string canonical = to_json(request).dump();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), digest, &len,
                   EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

const std::string& user_content(const CompletionRequest& request) {
    for (const auto& m : request.messages) {
        if (m.role == Role::user) {
            return m.content;
        }
    }
    throw Error("completion request has no user message");
}

}  // namespace

MockBackend::MockBackend(std::vector<MockEntry> entries,
                         std::optional<std::string> fallback)
    : entries_(std::move(entries)), fallback_(std::move(fallback)) {}

ModelTranscript MockBackend::complete(const CompletionRequest& request) {
    validate_request(request);
    calls_.fetch_add(1);
    const std::string& prompt = user_content(request);
    ModelTranscript transcript;
    transcript.request = request;
    transcript.source = TranscriptSource::mock;
    transcript.cache_key = cache_key(request);
    transcript.timestamp = std::string{epoch_timestamp};
    for (const auto& entry : entries_) {
        const bool hit = std::all_of(
            entry.needles.begin(), entry.needles.end(), [&](const auto& n) {
                return prompt.find(n) != std::string::npos;
            });
        if (hit) {
            transcript.response_text = entry.response;
            transcript.latency_ms = entry.latency_ms;
            return transcript;
        }
    }
    if (fallback_) {
        transcript.response_text = *fallback_;
        return transcript;
    }
    throw BackendError("mock backend has no entry matching prompt: \"" +
                       prompt.substr(0, 120) + "\"");
}

std::shared_ptr<MockBackend> load_mock_script(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open mock script: " + path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("mock script " + path.string() + ": " + e.what());
    }
    std::optional<std::string> fallback;
    const json* entries = &doc;
    if (doc.is_object()) {
        if (doc.contains("fallback")) {
            fallback = doc["fallback"].get<std::string>();
        }
        entries = &doc.at("entries");
    }
    if (!entries->is_array()) {
        throw ParseError("mock script " + path.string() +
                         ": expected a list of entries");
    }
    std::vector<MockEntry> parsed;
    for (const auto& row : *entries) {
        MockEntry entry;
        try {
            if (row.contains("needle")) {
                entry.needles.push_back(row["needle"].get<std::string>());
            }
            for (const auto& n : row.value("needles", json::array())) {
                entry.needles.push_back(n.get<std::string>());
            }
            entry.response = row.at("response").get<std::string>();
            if (row.contains("latency_ms")) {
                entry.latency_ms = row["latency_ms"].get<double>();
            }
        } catch (const json::exception& e) {
            throw ParseError("mock script " + path.string() + ": " + e.what());
        }
        parsed.push_back(std::move(entry));
    }
    return std::make_shared<MockBackend>(std::move(parsed),
                                         std::move(fallback));
}

HttpBackend::Options HttpBackend::options_from_env() {
    Options options;
    if (const char* url = std::getenv("AGRI_BASE_URL"); url && *url) {
        options.base_url = url;
    } else {
        options.base_url = "https://api.openai.com";
    }
    if (const char* key = std::getenv("AGRI_API_KEY")) {
        options.api_key = key;
    }
    return options;
}

HttpBackend::HttpBackend(Options options) : options_(std::move(options)) {
    std::string url = options_.base_url;
    while (!url.empty() && url.back() == '/') {
        url.pop_back();
    }
    if (url.empty()) {
        throw ConfigError({"backend base URL is empty"});
    }
    // Split scheme://host[:port] from any path prefix baked into the URL.
    const size_t scheme = url.find("://");
    const size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const size_t slash = url.find('/', host_start);
    host_ = url.substr(0, slash);
    if (slash != std::string::npos) {
        path_prefix_ = url.substr(slash);
    }
}

ModelTranscript HttpBackend::complete(const CompletionRequest& request) {
    validate_request(request);
    if (options_.api_key.empty()) {
        throw AuthError(
            "no API credential; set AGRI_API_KEY before using the live "
            "backend");
    }
    json body = to_json(request);
    if (request.max_output_tokens) {
        body.erase("max_output_tokens");
        body["max_tokens"] = *request.max_output_tokens;
    }
    const std::string payload = body.dump();
    const std::string path = path_prefix_ + "/v1/chat/completions";

    std::mt19937_64 jitter{std::random_device{}()};
    std::string last_error;
    int last_status = 0;
    const auto started = std::chrono::steady_clock::now();
    for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
        if (attempt > 1) {
            double delay = options_.retry.base_delay_ms *
                           static_cast<double>(1 << (attempt - 2));
            delay = std::min(delay, options_.retry.max_delay_ms);
            delay += std::uniform_real_distribution<double>(
                0.0, delay / 2.0 + 1.0)(jitter);
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long>(delay)));
        }
        httplib::Client client(host_);
        client.set_connection_timeout(std::chrono::duration<double>(
            options_.timeout_s));
        client.set_read_timeout(std::chrono::duration<double>(
            options_.timeout_s));
        client.set_bearer_token_auth(options_.api_key);
        auto res = client.Post(path, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            last_status = 0;
            continue;
        }
        last_status = res->status;
        if (res->status == 401 || res->status == 403) {
            throw AuthError("authentication rejected (HTTP " +
                            std::to_string(res->status) + "): " + res->body);
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = res->body;
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            throw ApiError("HTTP " + std::to_string(res->status) + ": " +
                           res->body);
        }
        const auto elapsed =
            std::chrono::duration<double, std::milli>(
                std::chrono::steady_clock::now() - started)
                .count();
        ModelTranscript transcript;
        transcript.request = request;
        transcript.source = TranscriptSource::live;
        transcript.cache_key = cache_key(request);
        transcript.latency_ms = elapsed;
        transcript.timestamp = utc_timestamp();
        try {
            const json reply = json::parse(res->body);
            transcript.response_text = reply.at("choices")
                                           .at(0)
                                           .at("message")
                                           .at("content")
                                           .get<std::string>();
        } catch (const json::exception& e) {
            throw ApiError(std::string{"malformed completion response: "} +
                           e.what());
        }
        return transcript;
    }
    if (last_status == 429) {
        throw RateLimitError("rate limited after " +
                             std::to_string(options_.retry.max_attempts) +
                             " attempts: " + last_error);
    }
    if (last_status >= 500) {
        throw ApiError("server error (HTTP " + std::to_string(last_status) +
                       ") after " +
                       std::to_string(options_.retry.max_attempts) +
                       " attempts: " + last_error);
    }
    throw NetworkError("request to " + host_ + " failed after " +
                       std::to_string(options_.retry.max_attempts) +
                       " attempts: " + last_error);
}

CacheBackend::CacheBackend(std::filesystem::path file,
                           std::shared_ptr<Backend> upstream)
    : file_(std::move(file)), upstream_(std::move(upstream)) {
    std::ifstream in(file_, std::ios::binary);
    if (!in) {
        return;  // nothing cached yet
    }
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            ModelTranscript t = transcript_from_json(json::parse(line));
            std::string key = t.cache_key;
            index_.insert_or_assign(std::move(key), std::move(t));
        } catch (const Error& e) {
            throw ParseError("cache file " + file_.string() + ":" +
                             std::to_string(lineno) + ": " + e.what());
        } catch (const json::exception& e) {
            throw ParseError("cache file " + file_.string() + ":" +
                             std::to_string(lineno) + ": " + e.what());
        }
    }
}

ModelTranscript CacheBackend::complete(const CompletionRequest& request) {
    validate_request(request);
    const std::string key = cache_key(request);
    {
        std::lock_guard lock(mutex_);
        if (auto it = index_.find(key); it != index_.end()) {
            hits_.fetch_add(1);
            ModelTranscript replay = it->second;
            replay.source = TranscriptSource::cache;
            return replay;
        }
    }
    misses_.fetch_add(1);
    if (!upstream_) {
        throw BackendError("cache miss for key " + key +
                           " and no upstream backend configured");
    }
    // Deliberately outside the lock: concurrent misses on the same key may
    // both go upstream; both record the same key.
    ModelTranscript fresh = upstream_->complete(request);
    fresh.cache_key = key;
    std::lock_guard lock(mutex_);
    std::ofstream out(file_, std::ios::binary | std::ios::app);
    if (!out) {
        throw Error("cannot append to cache file: " + file_.string());
    }
    out << to_json(fresh).dump() << '\n';
    out.flush();
    index_.insert_or_assign(key, fresh);
    return fresh;
}

RateLimiter::RateLimiter(size_t requests, double interval_s)
    : capacity_(static_cast<double>(requests)),
      rate_per_ms_(static_cast<double>(requests) / (interval_s * 1000.0)),
      tokens_(static_cast<double>(requests)),
      last_(std::chrono::steady_clock::now()) {
    if (requests == 0 || interval_s <= 0.0) {
        throw ConfigError({"rate limit needs requests >= 1 and interval > 0"});
    }
}

void RateLimiter::acquire() {
    std::unique_lock lock(mutex_);
    for (;;) {
        const auto now = std::chrono::steady_clock::now();
        const double elapsed_ms =
            std::chrono::duration<double, std::milli>(now - last_).count();
        tokens_ = std::min(capacity_, tokens_ + elapsed_ms * rate_per_ms_);
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const double wait_ms = (1.0 - tokens_) / rate_per_ms_;
        cv_.wait_for(lock, std::chrono::duration<double, std::milli>(wait_ms));
    }
}

ThrottledBackend::ThrottledBackend(std::shared_ptr<Backend> upstream,
                                   std::shared_ptr<RateLimiter> limiter)
    : upstream_(std::move(upstream)), limiter_(std::move(limiter)) {
    if (!upstream_ || !limiter_) {
        throw Error("throttled backend needs an upstream and a limiter");
    }
}

ModelTranscript ThrottledBackend::complete(const CompletionRequest& request) {
    limiter_->acquire();
    return upstream_->complete(request);
}

}  // namespace chatagri
