#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "chatagri/error.hpp"
#include "chatagri/evaluation.hpp"
#include "support/oracles.hpp"

using namespace chatagri;

namespace {

ClassificationOutcome resolved(std::string id, std::string gold,
                               std::string pred, std::string stamp,
                               AlignmentStage stage = AlignmentStage::rule) {
    ClassificationOutcome out;
    out.example_id = std::move(id);
    out.gold_label = std::move(gold);
    out.predicted_label = std::move(pred);
    out.strategy = Strategy::manual;
    out.template_id = "manual-1";
    ModelTranscript t;
    t.request = make_request("test-model", "prompt for " + out.example_id);
    t.response_text = "Category: " + out.predicted_label + ".";
    t.source = TranscriptSource::mock;
    t.timestamp = std::move(stamp);
    out.transcripts.push_back(std::move(t));
    AlignmentResult a;
    a.label = out.predicted_label;
    a.stage = stage;
    if (stage == AlignmentStage::rule) a.rule_id = "cue-category-colon";
    out.alignment = a;
    out.turn_count = 1;
    return out;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("accuracy is the matching fraction") {
    CHECK(accuracy({"A", "B", "A"}, {"A", "B", "B"}) ==
          doctest::Approx(2.0 / 3.0));
    CHECK(accuracy({"A"}, {"A"}) == 1.0);
    CHECK_THROWS_AS(accuracy({}, {}), Error);
    CHECK_THROWS_AS(accuracy({"A"}, {"A", "B"}), Error);
}

TEST_CASE("hand-checked two-label case") {
    const LabelSchema schema({"A", "B"});
    const std::vector<std::string> gold = {"A", "A", "B"};
    const std::vector<std::string> pred = {"A", "B", "B"};

    const auto per_class = per_class_metrics(pred, gold, schema);
    REQUIRE(per_class.size() == 2);
    CHECK(per_class[0].tp == 1);
    CHECK(per_class[0].fp == 0);
    CHECK(per_class[0].fn == 1);
    CHECK(per_class[0].precision == 1.0);
    CHECK(per_class[0].recall == 0.5);
    CHECK(per_class[0].f1 == doctest::Approx(2.0 / 3.0));
    CHECK(per_class[1].tp == 1);
    CHECK(per_class[1].fp == 1);
    CHECK(per_class[1].fn == 0);
    CHECK(per_class[1].f1 == doctest::Approx(2.0 / 3.0));

    // Exact in double arithmetic, not just approximately.
    CHECK(weighted_f1(pred, gold, schema) == 2.0 / 3.0);
    CHECK(macro_f1(pred, gold, schema) == doctest::Approx(2.0 / 3.0));
    CHECK(micro_f1(pred, gold, schema) == accuracy(pred, gold));
}

TEST_CASE("labels outside the schema are rejected") {
    const LabelSchema schema({"A", "B"});
    CHECK_THROWS_AS(per_class_metrics({"C"}, {"A"}, schema), Error);
    CHECK_THROWS_AS(per_class_metrics({"A"}, {"C"}, schema), Error);
}

TEST_CASE("absent classes score zero instead of dividing by zero") {
    const LabelSchema schema({"A", "B", "C"});
    const std::vector<std::string> gold = {"A", "A"};
    const std::vector<std::string> pred = {"A", "A"};
    const auto per_class = per_class_metrics(pred, gold, schema);
    CHECK(per_class[1].precision == 0.0);
    CHECK(per_class[1].recall == 0.0);
    CHECK(per_class[1].f1 == 0.0);
    CHECK(per_class[2].support == 0);
    // Macro still averages over all three labels.
    CHECK(macro_f1(pred, gold, schema) == doctest::Approx(1.0 / 3.0));
    CHECK(weighted_f1(pred, gold, schema) == 1.0);
}

TEST_CASE("micro equals accuracy on random single-label vectors") {
    std::mt19937_64 rng(11);
    for (int round = 0; round < 50; ++round) {
        const int label_count = 2 + static_cast<int>(rng() % 5);
        const size_t n = 1 + rng() % 60;
        std::vector<std::string> names;
        for (int c = 0; c < label_count; ++c)
            names.push_back("L" + std::to_string(c));
        const LabelSchema schema{names};
        std::vector<std::string> gold, pred;
        for (size_t i = 0; i < n; ++i) {
            gold.push_back(names[rng() % label_count]);
            pred.push_back(names[rng() % label_count]);
        }
        CHECK(micro_f1(pred, gold, schema) == accuracy(pred, gold));
    }
}

TEST_CASE("metrics agree with the brute-force counter") {
    std::mt19937_64 rng(23);
    for (int round = 0; round < 100; ++round) {
        const int label_count = 2 + static_cast<int>(rng() % 6);
        const size_t n = 1 + rng() % 100;
        std::vector<std::string> names;
        for (int c = 0; c < label_count; ++c)
            names.push_back("L" + std::to_string(c));
        const LabelSchema schema{names};
        std::vector<int> gold_ids, pred_ids;
        std::vector<std::string> gold, pred;
        for (size_t i = 0; i < n; ++i) {
            gold_ids.push_back(static_cast<int>(rng() % label_count));
            pred_ids.push_back(static_cast<int>(rng() % label_count));
            gold.push_back(names[gold_ids.back()]);
            pred.push_back(names[pred_ids.back()]);
        }
        const auto ref = oracle::brute_metrics(gold_ids, pred_ids, label_count);
        CHECK(accuracy(pred, gold) == doctest::Approx(ref.accuracy).epsilon(1e-12));
        CHECK(weighted_f1(pred, gold, schema) ==
              doctest::Approx(ref.weighted_f1).epsilon(1e-12));
        CHECK(macro_f1(pred, gold, schema) ==
              doctest::Approx(ref.macro_f1).epsilon(1e-12));
        CHECK(micro_f1(pred, gold, schema) ==
              doctest::Approx(ref.micro_f1).epsilon(1e-12));
    }
}

TEST_CASE("build_report folds outcomes, stats and metadata") {
    const LabelSchema schema({"A", "B"});
    std::vector<ClassificationOutcome> outcomes;
    outcomes.push_back(resolved("e1", "A", "A", "2023-03-16T09:05:00Z"));
    outcomes.push_back(resolved("e2", "a", "B", "2023-03-16T09:00:00Z",
                                AlignmentStage::similarity));
    ClassificationOutcome aborted;
    aborted.example_id = "e3";
    aborted.gold_label = "B";
    aborted.strategy = Strategy::manual;
    aborted.template_id = "manual-1";
    aborted.unresolved = true;
    aborted.failure_reason = "noncommittal";
    ModelTranscript t;
    t.request = make_request("test-model", "prompt for e3");
    t.timestamp = "2023-03-16T09:10:00Z";
    aborted.transcripts.push_back(t);
    outcomes.push_back(aborted);

    const auto report = build_report(outcomes, schema, 99);
    CHECK(report.scored == 2);
    CHECK(report.accuracy == 0.5);
    CHECK(report.labels == std::vector<std::string>{"A", "B"});
    // Gold "a" was canonicalized to the display name row.
    REQUIRE(report.confusion.size() == 2);
    CHECK(report.confusion[0][0] == 1);
    CHECK(report.confusion[0][1] == 1);
    CHECK(report.confusion[1][0] == 0);
    CHECK(report.confusion[1][1] == 0);
    CHECK(report.alignment_stats.rule_stage == 1);
    CHECK(report.alignment_stats.similarity_stage == 1);
    CHECK(report.alignment_stats.unresolved == 1);
    CHECK(report.run_metadata.model == "test-model");
    CHECK(report.run_metadata.strategy == "manual");
    CHECK(report.run_metadata.template_id == "manual-1");
    CHECK(report.run_metadata.seed == 99);
    CHECK(report.run_metadata.started_at == "2023-03-16T09:00:00Z");
    CHECK(report.run_metadata.finished_at == "2023-03-16T09:10:00Z");
}

TEST_CASE("build_report needs gold labels and resolved outcomes") {
    const LabelSchema schema({"A", "B"});

    auto missing_gold = resolved("e1", "A", "A", "2023-01-01T00:00:00Z");
    missing_gold.gold_label.reset();
    CHECK_THROWS_AS(build_report({missing_gold}, schema), Error);

    ClassificationOutcome aborted;
    aborted.example_id = "e1";
    aborted.gold_label = "A";
    aborted.unresolved = true;
    CHECK_THROWS_AS(build_report({aborted}, schema), Error);
}

TEST_CASE("mixed strategies and templates are reported as mixed") {
    const LabelSchema schema({"A", "B"});
    auto first = resolved("e1", "A", "A", "2023-01-01T00:00:00Z");
    auto second = resolved("e2", "B", "B", "2023-01-01T00:00:00Z");
    second.strategy = Strategy::similarity_direct;
    second.template_id = "similarity-direct";
    const auto report = build_report({first, second}, schema);
    CHECK(report.run_metadata.strategy == "mixed");
    CHECK(report.run_metadata.template_id == "mixed");
}

TEST_CASE("report json is stable and carries every section") {
    const LabelSchema schema({"A", "B"});
    const std::vector<ClassificationOutcome> outcomes = {
        resolved("e1", "A", "A", "2023-01-01T00:00:00Z")};
    const auto report = build_report(outcomes, schema);
    const auto a = to_json(report).dump(2);
    const auto b = to_json(build_report(outcomes, schema)).dump(2);
    CHECK(a == b);
    for (const char* key :
         {"labels", "scored", "accuracy", "per_class", "weighted_f1",
          "macro_f1", "micro_f1", "confusion", "alignment_stats",
          "run_metadata"}) {
        CHECK(to_json(report).contains(key));
    }
}

TEST_CASE("text report shows the table, summary and confusion matrix") {
    const LabelSchema schema({"A", "B"});
    const auto report = build_report(
        {resolved("e1", "A", "A", "2023-01-01T00:00:00Z"),
         resolved("e2", "B", "A", "2023-01-01T00:00:00Z")},
        schema);
    const auto text = report_to_text(report);
    CHECK(text.find("accuracy") != std::string::npos);
    CHECK(text.find("weighted-F1") != std::string::npos);
    CHECK(text.find("confusion") != std::string::npos);
    CHECK(text.find("0.5000") != std::string::npos);
    CHECK(text.find("A") != std::string::npos);
}

}  // TEST_SUITE
