#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chatagri/backend.hpp"
#include "chatagri/classify.hpp"
#include "chatagri/corpus.hpp"
#include "chatagri/prompting.hpp"

namespace chatagri {

struct RateLimitConfig {
    size_t requests = 0;  // 0 disables throttling
    double interval_s = 0.0;
};

// One experiment, declaratively. Loaded from a JSON config file; every field
// can be overridden by a command-line flag of the same name.
struct RunConfig {
    std::filesystem::path dataset;
    DatasetFormat format = DatasetFormat::csv;
    std::filesystem::path schema;
    Strategy strategy = Strategy::manual;
    std::string template_ref;  // built-in template id or a JSON file path
    std::string backend = "mock";  // mock | live | cache+live | cache+mock
    std::string model = "gpt-3.5-turbo";
    std::filesystem::path cache;
    std::filesystem::path rules;  // empty -> built-in default rule set
    uint64_t seed = 0;
    size_t workers = 1;
    RateLimitConfig rate_limit;
    std::filesystem::path output_dir = "runs";
    std::optional<size_t> sample_n;
    std::filesystem::path mock_script;
    double temperature = 0.0;
    std::optional<int> max_output_tokens;
    std::string system_message{default_system_message};
    std::filesystem::path resume_from;  // previous run dir or outcomes file
};

RunConfig load_run_config(const std::filesystem::path& path);

// Applies one "--name value" override; name uses the config field spelling
// (dashes and underscores interchangeable). Throws ConfigError on unknown
// names or unparseable values.
void apply_override(RunConfig& config, std::string_view name,
                    std::string_view value);

enum class CommandKind { classify, select_prompt, trigger_prompts };

// Collects every problem (missing files, bad combinations) and throws one
// ConfigError listing them all; nothing is written before this passes.
void validate_run_config(const RunConfig& config, CommandKind kind);

// mock / live / cache+live / cache+mock, with throttling when configured.
std::shared_ptr<Backend> build_backend(const RunConfig& config);

// Resolves template_ref to a built-in or a file, checks it against the
// configured strategy, and adapts it for chain-of-thought execution.
std::optional<PromptTemplate> resolve_template(const RunConfig& config,
                                               const LabelSchema& schema);

InferenceOptions inference_options(const RunConfig& config);

struct ClassifyRun {
    std::filesystem::path run_dir;
    std::vector<ClassificationOutcome> outcomes;
    size_t resolved = 0;
    size_t unresolved = 0;  // choice aborts
    size_t failed = 0;      // backend failures, recorded and skipped
};

// Classifies the whole dataset into a fresh timestamped run directory:
// outcomes.jsonl + transcripts.jsonl, one outcome per example, failures
// recorded in place.
ClassifyRun cmd_classify(const RunConfig& config, std::ostream& log);

// Scores an outcomes file and writes report.json / report.txt next to it (or
// into output_dir). Returns 3 when unresolved examples are present, else 0.
int cmd_evaluate(const std::filesystem::path& outcomes_path,
                 const std::filesystem::path& schema_path,
                 const std::filesystem::path& output_dir, uint64_t seed,
                 std::ostream& log);

// Scores candidate templates on one shared sampled subset and writes
// selection_report.json + selected_template.json.
int cmd_select_prompt(const RunConfig& config,
                      const std::filesystem::path& candidates_path,
                      std::ostream& log);

// Asks the model for k candidate templates and writes templates.json.
int cmd_trigger_prompts(const RunConfig& config, std::string_view task_name,
                        size_t k, std::ostream& log);

// Debug surface: runs the alignment pipeline over one answer and prints the
// stage, label and (for the similarity stage) the per-label distance table.
int cmd_align(std::string_view answer,
              const std::filesystem::path& schema_path,
              const std::filesystem::path& rules_path, std::ostream& log);

}  // namespace chatagri
