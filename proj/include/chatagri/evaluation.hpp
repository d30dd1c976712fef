#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chatagri/classify.hpp"
#include "chatagri/corpus.hpp"

namespace chatagri {

// Fraction of positions where pred equals gold. Lists must be non-empty and
// the same length.
double accuracy(const std::vector<std::string>& pred,
                const std::vector<std::string>& gold);

struct ClassMetrics {
    std::string label;
    size_t support = 0;
    size_t tp = 0;
    size_t fp = 0;
    size_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Per-label counts and scores over every schema label, schema order. Labels
// outside the schema are an error; 0/0 ratios collapse to 0.
std::vector<ClassMetrics> per_class_metrics(
    const std::vector<std::string>& pred, const std::vector<std::string>& gold,
    const LabelSchema& schema);

// Sum of per-class F1 weighted by gold support share.
double weighted_f1(const std::vector<std::string>& pred,
                   const std::vector<std::string>& gold,
                   const LabelSchema& schema);

// Unweighted mean of per-class F1 over every schema label.
double macro_f1(const std::vector<std::string>& pred,
                const std::vector<std::string>& gold,
                const LabelSchema& schema);

// F1 over pooled counts; coincides with accuracy bit-for-bit when every
// example carries exactly one label.
double micro_f1(const std::vector<std::string>& pred,
                const std::vector<std::string>& gold,
                const LabelSchema& schema);

struct AlignmentStats {
    size_t rule_stage = 0;        // answers a cue or mention rule resolved
    size_t similarity_stage = 0;  // answers settled by edit distance
    size_t choice = 0;            // letter-choice resolutions
    size_t unresolved = 0;        // aborted examples, outside the metrics
};

struct RunMetadata {
    std::string strategy;
    std::string template_id;
    std::string model;
    uint64_t seed = 0;
    // Bounds of the transcript timestamps, so a replayed run reproduces the
    // original report byte for byte.
    std::string started_at;
    std::string finished_at;
};

struct EvalReport {
    std::vector<std::string> labels;  // confusion axis, schema order
    size_t scored = 0;
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
    double weighted_f1 = 0.0;
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
    std::vector<std::vector<size_t>> confusion;  // rows gold, columns pred
    AlignmentStats alignment_stats;
    RunMetadata run_metadata;
};

// Folds outcomes into the full report. Unresolved outcomes are excluded from
// every metric denominator but surface in alignment_stats; at least one
// resolved outcome is required, and each one needs its gold label.
EvalReport build_report(const std::vector<ClassificationOutcome>& outcomes,
                        const LabelSchema& schema, uint64_t seed = 0);

nlohmann::json to_json(const EvalReport& report);

// Plain-text rendering: per-class table, summary metrics, confusion matrix.
std::string report_to_text(const EvalReport& report);

}  // namespace chatagri
