#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "chatagri/alignment.hpp"
#include "chatagri/backend.hpp"
#include "chatagri/corpus.hpp"

namespace chatagri {

enum class Strategy {
    manual,
    model_triggered,
    similarity_direct,
    similarity_progressive,
    chain_of_thought,
};

Strategy parse_strategy(std::string_view name);
std::string to_string(Strategy strategy);
bool is_similarity(Strategy strategy);

// Appended to a prompt when explanations are unwanted.
inline constexpr std::string_view answer_suppressor =
    "Please only answer the category.";

// Appended instead of the suppressor under the chain-of-thought strategy.
inline constexpr std::string_view chain_of_thought_clause =
    "Please provide a step-by-step analysis towards the semantic and "
    "keywords, and present the corresponding classification reasoning "
    "process.";

// A prompt body with slot tokens. Single-sentence strategies use [SENT] and
// [CATE] exactly once each; similarity strategies use [SENT0] for the target
// plus [SENT1]..[SENTk] for the pivot sentences.
struct PromptTemplate {
    std::string id;
    Strategy strategy = Strategy::manual;
    std::string body;
    bool suppress_explanation = false;
    bool repaired = false;  // slots were appended after model generation
};

// Throws ParseError when the body violates its strategy's slot invariant.
void validate_template(const PromptTemplate& tmpl);

// Number of pivot slots [SENT1]..[SENTk] in a similarity body.
size_t pivot_slot_count(const PromptTemplate& tmpl);

std::vector<PromptTemplate> builtin_templates();
// Resolves a built-in id; nullopt for unknown ids.
std::optional<PromptTemplate> find_builtin(std::string_view id);

PromptTemplate load_template(const std::filesystem::path& path);
void save_template(const std::filesystem::path& path,
                   const PromptTemplate& tmpl);
nlohmann::json to_json(const PromptTemplate& tmpl);
PromptTemplate template_from_json(const nlohmann::json& doc);

struct RenderedPrompt {
    std::string text;
    std::string template_id;
    std::string example_id;
    size_t turn_index = 0;
};

// Joins display names as "A", "A or B", "A, B, or C".
std::string join_alternatives(const std::vector<std::string>& names);

// Single-sentence strategies: substitute [SENT] and [CATE], then append the
// suppressor or the chain-of-thought clause as the strategy dictates.
RenderedPrompt render_prompt(const PromptTemplate& tmpl,
                             std::string_view sentence,
                             const LabelSchema& schema,
                             std::string_view example_id = {});

// One-turn multi-choice similarity question over lettered pivot sentences.
RenderedPrompt render_similarity_direct(
    std::string_view target,
    const std::vector<std::pair<std::string, std::string>>& pivots,
    std::string_view example_id = {});

// Two-way tournament round; answers are constrained to the letters A and B.
RenderedPrompt render_similarity_pair(std::string_view target,
                                      std::string_view a, std::string_view b,
                                      std::string_view example_id = {},
                                      size_t turn_index = 0);

// Custom similarity bodies: substitutes [SENT0] with the target and
// [SENT1]..[SENTk] with the pivots; the slot count must match.
RenderedPrompt render_similarity_template(
    const PromptTemplate& tmpl, std::string_view target,
    const std::vector<std::string>& pivots, std::string_view example_id = {},
    size_t turn_index = 0);

// Asks the model itself for k candidate templates and parses the numbered or
// bulleted list out of its reply. Candidates missing a slot are repaired by
// appending it and flagged; unrepairable ones are dropped.
std::vector<PromptTemplate> trigger_prompts(Backend& backend,
                                            std::string_view task_name,
                                            size_t k = 5,
                                            const InferenceOptions& options = {});

// The meta-prompt trigger_prompts sends, exposed for inspection.
std::string trigger_meta_prompt(std::string_view task_name, size_t k);

struct PromptSelectionReport {
    struct Candidate {
        std::string id;
        std::string body;
        bool repaired = false;
        size_t correct = 0;
        size_t total = 0;
        double accuracy = 0.0;
    };
    std::vector<Candidate> candidates;
    size_t selected_index = 0;
    size_t sample_size = 0;
    uint64_t seed = 0;
};

nlohmann::json to_json(const PromptSelectionReport& report);

// Scores every candidate on one shared seeded sample (classify, align,
// compare against gold) and returns the most accurate one; ties go to the
// earlier candidate.
std::pair<PromptTemplate, PromptSelectionReport> select_best_prompt(
    const std::vector<PromptTemplate>& candidates,
    const std::vector<LabeledExample>& examples, const LabelSchema& schema,
    const std::vector<AlignmentRule>& rules, Backend& backend,
    const InferenceOptions& options, size_t n = 100, uint64_t seed = 0);

}  // namespace chatagri
