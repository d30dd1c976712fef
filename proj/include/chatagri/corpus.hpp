#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace chatagri {

/// One document of a labeled dataset.
struct LabeledExample {
    std::string id;
    std::string text;
    std::string language;  // BCP-47-style tag, empty when unknown
    std::optional<std::string> gold_label;

    bool operator==(const LabeledExample&) const = default;
};

/// The category set: ordered display names, their normalized keys, and the
/// per-category pivot sentences / pivot answers used by similarity prompting
/// and answer alignment. Immutable after construction; label order is the
/// tie-breaking order everywhere downstream.
class LabelSchema {
  public:
    /// Builds a schema from display names. Every label's pivot-answer list
    /// starts with its display name and normalized key; `extra_answers` and
    /// `pivots` add per-label entries on top.
    explicit LabelSchema(
        std::vector<std::string> labels,
        std::vector<std::pair<std::string, std::string>> pivots = {},
        std::vector<std::pair<std::string, std::string>> extra_answers = {});

    /// Reads a schema file: a JSON document with "labels" (array), optional
    /// "pivots" (label -> sentence) and "pivot_answers" (label -> array).
    static LabelSchema load(const std::filesystem::path& path);

    const std::vector<std::string>& labels() const { return labels_; }
    size_t size() const { return labels_.size(); }
    const std::string& label(size_t i) const { return labels_[i]; }
    const std::string& normalized_key(size_t i) const { return keys_[i]; }

    /// Index of a label by display name or normalized key.
    std::optional<size_t> index_of(std::string_view name_or_key) const;
    bool contains(std::string_view name_or_key) const {
        return index_of(name_or_key).has_value();
    }

    const std::optional<std::string>& pivot(size_t i) const { return pivots_[i]; }
    bool has_all_pivots() const;

    const std::vector<std::string>& pivot_answers(size_t i) const {
        return pivot_answers_[i];
    }

    /// Schema restricted to the given labels, keeping their pivots and pivot
    /// answers. Order follows `labels`. Needs at least two of them.
    LabelSchema subset(const std::vector<std::string>& labels) const;

  private:
    std::vector<std::string> labels_;
    std::vector<std::string> keys_;
    std::vector<std::optional<std::string>> pivots_;
    std::vector<std::vector<std::string>> pivot_answers_;
};

enum class DatasetFormat { csv, jsonl };

DatasetFormat parse_dataset_format(std::string_view name);
std::string to_string(DatasetFormat f);

/// Loads a dataset file, validating every row against the schema. CSV files
/// need a `id,text,label[,lang]` header (RFC-4180 quoting); JSONL files hold
/// one object per line with fields `id`, `text`, `label`, optional `lang`.
/// Row order is preserved. Malformed rows are reported with their line number.
std::vector<LabeledExample> load_dataset(const std::filesystem::path& path,
                                         DatasetFormat format,
                                         const LabelSchema& schema);

/// Inverse of load_dataset; loading the written file yields an equal list.
void save_dataset(const std::filesystem::path& path, DatasetFormat format,
                  const std::vector<LabeledExample>& examples);

/// Draws min(n, |examples|) distinct examples, deterministically in (examples,
/// n, seed) and identically across platforms. The selection is a seeded
/// permutation prefix, so n >= |examples| returns all examples permuted.
std::vector<LabeledExample> sample_subset(
    const std::vector<LabeledExample>& examples, size_t n, uint64_t seed);

}  // namespace chatagri
