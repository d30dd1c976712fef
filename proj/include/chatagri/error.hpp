#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace chatagri {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dataset / schema / template / rule file problems.
struct ParseError : Error {
    using Error::Error;
};

// Backend failures, split so callers can react differently.
struct BackendError : Error {
    using Error::Error;
};
struct AuthError : BackendError {
    using BackendError::BackendError;
};
struct NetworkError : BackendError {
    using BackendError::BackendError;
};
struct RateLimitError : BackendError {
    using BackendError::BackendError;
};
struct ApiError : BackendError {
    using BackendError::BackendError;
};

// A pairwise/multi-choice answer that names no choice and matches no rule.
// Aborts the affected example, not the run.
struct UnresolvableAnswerError : Error {
    using Error::Error;
};

// Configuration validation collects every problem before reporting.
struct ConfigError : Error {
    explicit ConfigError(std::vector<std::string> problems_)
        : Error(join(problems_)), problems(std::move(problems_)) {}

    std::vector<std::string> problems;

  private:
    static std::string join(const std::vector<std::string>& ps) {
        std::string out = "invalid configuration:";
        for (const auto& p : ps) {
            out += "\n  - " + p;
        }
        return out;
    }
};

}  // namespace chatagri
