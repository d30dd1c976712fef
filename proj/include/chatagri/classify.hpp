#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chatagri/alignment.hpp"
#include "chatagri/backend.hpp"
#include "chatagri/corpus.hpp"
#include "chatagri/prompting.hpp"

namespace chatagri {

// Audit trail of one tournament turn (or the direct strategy's single turn):
// which letters were on offer and which one the model picked.
struct ChoiceRecord {
    size_t turn_index = 0;
    std::string letter;
    std::string label;
    std::vector<std::pair<std::string, std::string>> offered;  // letter, label
};

struct ClassificationOutcome {
    std::string example_id;
    std::optional<std::string> gold_label;
    std::string predicted_label;
    Strategy strategy = Strategy::manual;
    std::string template_id;
    std::vector<ModelTranscript> transcripts;
    // Single-sentence strategies record the alignment pipeline's verdict;
    // similarity strategies record one choice per turn instead.
    std::optional<AlignmentResult> alignment;
    std::vector<ChoiceRecord> choices;
    size_t turn_count = 0;
    // A tournament abort leaves the example unresolved: no predicted label,
    // excluded from metrics but still reported.
    bool unresolved = false;
    std::string failure_reason;
};

nlohmann::json to_json(const ClassificationOutcome& outcome);
ClassificationOutcome outcome_from_json(const nlohmann::json& doc);

// manual / model_triggered / chain_of_thought: one prompt, one fresh
// conversation, one alignment pass.
ClassificationOutcome classify_single(const LabeledExample& example,
                                      const PromptTemplate& tmpl,
                                      const LabelSchema& schema,
                                      Backend& backend,
                                      const std::vector<AlignmentRule>& rules,
                                      const InferenceOptions& options = {});

// One multi-choice question over all lettered pivots. A custom template may
// replace the built-in wording; its pivot slot count must match the schema.
ClassificationOutcome classify_similarity_direct(
    const LabeledExample& example, const LabelSchema& schema, Backend& backend,
    const std::vector<AlignmentRule>& rules,
    const InferenceOptions& options = {},
    const PromptTemplate* tmpl = nullptr);

// Pairwise tournament: the champion pivot (always lettered A) meets each
// remaining label's pivot in schema order; N labels cost exactly N-1 calls.
ClassificationOutcome classify_similarity_progressive(
    const LabeledExample& example, const LabelSchema& schema, Backend& backend,
    const std::vector<AlignmentRule>& rules,
    const InferenceOptions& options = {},
    const PromptTemplate* tmpl = nullptr);

// Strategy dispatch. tmpl is required for single-sentence strategies and
// optional for similarity ones.
ClassificationOutcome classify_example(const LabeledExample& example,
                                       Strategy strategy,
                                       const PromptTemplate* tmpl,
                                       const LabelSchema& schema,
                                       Backend& backend,
                                       const std::vector<AlignmentRule>& rules,
                                       const InferenceOptions& options = {});

}  // namespace chatagri
