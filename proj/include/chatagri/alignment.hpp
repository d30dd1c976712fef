#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "chatagri/corpus.hpp"

namespace chatagri {

// Minimum number of single-character insertions, deletions and substitutions
// turning a into b, counted over Unicode scalar values (not bytes).
size_t levenshtein(std::string_view a, std::string_view b);

enum class RuleKind { cue_phrase, label_mention };

RuleKind parse_rule_kind(std::string_view name);
std::string to_string(RuleKind kind);

// One declarative answer-matching rule. cue_phrase patterns carry exactly one
// {X} capture slot ("Category: {X}"); label_mention ignores the pattern and
// searches for each pivot answer at word boundaries.
struct AlignmentRule {
    std::string id;
    RuleKind kind = RuleKind::cue_phrase;
    std::string pattern;
    int priority = 0;
};

// Validates a rule set: non-empty ids, unique priorities, exactly one capture
// slot per cue pattern. Throws ParseError.
void validate_rules(const std::vector<AlignmentRule>& rules);

std::vector<AlignmentRule> default_rules();

std::vector<AlignmentRule> load_rules(const std::filesystem::path& path);
void save_rules(const std::filesystem::path& path,
                const std::vector<AlignmentRule>& rules);

enum class AlignmentStage { rule, similarity };

std::string to_string(AlignmentStage stage);

struct AlignmentResult {
    std::string label;
    AlignmentStage stage = AlignmentStage::rule;
    // Present exactly when stage == rule.
    std::optional<std::string> rule_id;
    // Present exactly when stage == similarity: the winning label's score.
    std::optional<size_t> distance;
    // Per-label minimum pivot distance, schema order; empty for rule stage.
    std::vector<std::pair<std::string, size_t>> candidates;
    // Edit-distance evaluations spent on this call; 0 whenever a rule fired.
    size_t levenshtein_evals = 0;
};

nlohmann::json to_json(const AlignmentResult& result);
AlignmentResult alignment_result_from_json(const nlohmann::json& doc);

// Rule stage only. Rules fire in priority order (lower first); a cue rule
// resolves on its last occurrence whose capture normalizes to a label key or
// pivot answer, a label_mention rule on the earliest word-bounded pivot hit.
// Absence of a match is a value, not an error.
std::optional<std::pair<std::string, std::string>> align_rule(
    std::string_view answer, const std::vector<AlignmentRule>& rules,
    const LabelSchema& schema);

// Similarity stage: edit distance from the normalized answer to every pivot
// answer of every label; smallest per-label minimum wins, ties broken by
// schema order. Total over non-empty pivot repositories.
AlignmentResult align_similarity(std::string_view answer,
                                 const LabelSchema& schema);

// Full pipeline: rule stage first and, only when nothing fires, the
// similarity fallback. Always returns a schema label.
AlignmentResult align(std::string_view answer,
                      const std::vector<AlignmentRule>& rules,
                      const LabelSchema& schema);

// Maps a multi-choice reply ("B", "I'd say sentence B") onto the label behind
// the first word-bounded choice letter. Without any letter the rule stage runs
// over the listed labels; if that abstains too the answer is unresolvable and
// the caller gets an UnresolvableAnswerError.
std::string align_choice(
    std::string_view answer,
    const std::vector<std::pair<std::string, std::string>>& letters);
std::string align_choice(
    std::string_view answer,
    const std::vector<std::pair<std::string, std::string>>& letters,
    const std::vector<AlignmentRule>& fallback_rules);

}  // namespace chatagri
