#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace chatagri {

enum class Role { system, user };

Role parse_role(std::string_view name);
std::string to_string(Role role);

struct Message {
    Role role = Role::user;
    std::string content;
};

// One model call. Conversations are never reused: a request carries exactly
// one user message, optionally preceded by a system message.
struct CompletionRequest {
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.0;
    std::optional<int> max_output_tokens;
};

inline constexpr std::string_view default_system_message =
    "You are a text classification assistant.";

// Throws on violated request invariants (message shape, temperature < 0).
void validate_request(const CompletionRequest& request);

// Convenience builder for the common shape: optional system + one user turn.
CompletionRequest make_request(std::string model, std::string user_content,
                               std::string system_content = std::string{
                                   default_system_message},
                               double temperature = 0.0,
                               std::optional<int> max_output_tokens = {});

// Knobs shared by every model-calling operation.
struct InferenceOptions {
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    std::optional<int> max_output_tokens;
    std::string system_message{default_system_message};
};

CompletionRequest make_request(const InferenceOptions& options,
                               std::string user_content);

// Hex SHA-256 over the canonical serialization of (model, messages,
// temperature, max_output_tokens); stable across processes and platforms.
std::string cache_key(const CompletionRequest& request);

enum class TranscriptSource { live, cache, mock };

TranscriptSource parse_transcript_source(std::string_view name);
std::string to_string(TranscriptSource source);

struct ModelTranscript {
    CompletionRequest request;
    std::string response_text;
    TranscriptSource source = TranscriptSource::mock;
    std::string cache_key;
    std::optional<double> latency_ms;
    std::string timestamp;  // ISO-8601 UTC
};

nlohmann::json to_json(const CompletionRequest& request);
CompletionRequest request_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ModelTranscript& transcript);
ModelTranscript transcript_from_json(const nlohmann::json& doc);

// Current wall clock as 2023-03-16T09:00:00Z. Deterministic backends stamp
// the epoch instead so their transcripts are byte-stable.
std::string utc_timestamp();
inline constexpr std::string_view epoch_timestamp = "1970-01-01T00:00:00Z";

// The model behind every strategy. Implementations must tolerate concurrent
// complete() calls.
class Backend {
  public:
    virtual ~Backend() = default;
    virtual ModelTranscript complete(const CompletionRequest& request) = 0;
};

// Scripted response: fires when every needle occurs in the user message.
// Entries are tried in declaration order; the first hit wins.
struct MockEntry {
    std::vector<std::string> needles;
    std::string response;
    std::optional<double> latency_ms;  // recorded on the transcript, not slept
};

class MockBackend : public Backend {
  public:
    explicit MockBackend(std::vector<MockEntry> entries,
                         std::optional<std::string> fallback = std::nullopt);
    ModelTranscript complete(const CompletionRequest& request) override;
    size_t calls() const { return calls_.load(); }

  private:
    std::vector<MockEntry> entries_;
    std::optional<std::string> fallback_;
    std::atomic<size_t> calls_{0};
};

// Script file: JSON list of {needles or needle, response, latency_ms?},
// optionally wrapped as {entries: [...], fallback: "..."}.
std::shared_ptr<MockBackend> load_mock_script(
    const std::filesystem::path& path);

struct RetryPolicy {
    int max_attempts = 5;
    double base_delay_ms = 250.0;
    double max_delay_ms = 8000.0;
};

class HttpBackend : public Backend {
  public:
    struct Options {
        std::string base_url;
        std::string api_key;
        double timeout_s = 120.0;
        RetryPolicy retry;
    };

    // Reads AGRI_BASE_URL (default https://api.openai.com) and AGRI_API_KEY.
    static Options options_from_env();

    explicit HttpBackend(Options options);
    ModelTranscript complete(const CompletionRequest& request) override;

  private:
    Options options_;
    std::string host_;         // scheme://host[:port]
    std::string path_prefix_;  // leading path baked into the base URL
};

// Read-through replay cache over an append-only JSONL transcript file. A hit
// replays the stored transcript with source=cache; a miss defers to the
// upstream backend and appends its transcript. Without an upstream, misses
// are errors (pure replay mode).
class CacheBackend : public Backend {
  public:
    CacheBackend(std::filesystem::path file, std::shared_ptr<Backend> upstream);
    ModelTranscript complete(const CompletionRequest& request) override;
    size_t hits() const { return hits_.load(); }
    size_t misses() const { return misses_.load(); }

  private:
    std::filesystem::path file_;
    std::shared_ptr<Backend> upstream_;
    std::mutex mutex_;  // guards index_ and file appends
    std::unordered_map<std::string, ModelTranscript> index_;
    std::atomic<size_t> hits_{0};
    std::atomic<size_t> misses_{0};
};

// Token bucket: at most `requests` acquisitions per `interval_s` window,
// refilled continuously. acquire() blocks until a token is free.
class RateLimiter {
  public:
    RateLimiter(size_t requests, double interval_s);
    void acquire();

  private:
    double capacity_;
    double rate_per_ms_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mutex_;
    std::condition_variable cv_;
};

class ThrottledBackend : public Backend {
  public:
    ThrottledBackend(std::shared_ptr<Backend> upstream,
                     std::shared_ptr<RateLimiter> limiter);
    ModelTranscript complete(const CompletionRequest& request) override;

  private:
    std::shared_ptr<Backend> upstream_;
    std::shared_ptr<RateLimiter> limiter_;
};

}  // namespace chatagri
