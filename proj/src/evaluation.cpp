#include "chatagri/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "chatagri/error.hpp"

namespace chatagri {

using nlohmann::json;

namespace {

void check_lists(const std::vector<std::string>& pred,
                 const std::vector<std::string>& gold) {
    if (pred.size() != gold.size()) {
        throw Error("prediction and gold lists differ in length (" +
                    std::to_string(pred.size()) + " vs " +
                    std::to_string(gold.size()) + ")");
    }
    if (pred.empty()) {
        throw Error("cannot score an empty prediction list");
    }
}

double ratio(size_t num, size_t den) {
    return den == 0 ? 0.0
                    : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) {
    if (p == r) {
        return p;  // keeps micro-F1 == accuracy an exact identity
    }
    if (p + r == 0.0) {
        return 0.0;
    }
    return 2.0 * p * r / (p + r);
}

size_t label_index(const LabelSchema& schema, const std::string& label) {
    auto idx = schema.index_of(label);
    if (!idx) {
        throw Error("label '" + label + "' is not in the schema");
    }
    return *idx;
}

std::vector<std::vector<size_t>> confusion_matrix(
    const std::vector<std::string>& pred, const std::vector<std::string>& gold,
    const LabelSchema& schema) {
    check_lists(pred, gold);
    std::vector<std::vector<size_t>> confusion(
        schema.size(), std::vector<size_t>(schema.size(), 0));
    for (size_t i = 0; i < pred.size(); ++i) {
        confusion[label_index(schema, gold[i])]
                 [label_index(schema, pred[i])] += 1;
    }
    return confusion;
}

std::vector<ClassMetrics> metrics_from_confusion(
    const std::vector<std::vector<size_t>>& confusion,
    const LabelSchema& schema) {
    std::vector<ClassMetrics> out;
    for (size_t c = 0; c < schema.size(); ++c) {
        ClassMetrics m;
        m.label = schema.label(c);
        m.tp = confusion[c][c];
        for (size_t other = 0; other < schema.size(); ++other) {
            if (other != c) {
                m.fn += confusion[c][other];
                m.fp += confusion[other][c];
            }
        }
        m.support = m.tp + m.fn;
        m.precision = ratio(m.tp, m.tp + m.fp);
        m.recall = ratio(m.tp, m.tp + m.fn);
        m.f1 = harmonic(m.precision, m.recall);
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace

double accuracy(const std::vector<std::string>& pred,
                const std::vector<std::string>& gold) {
    check_lists(pred, gold);
    size_t correct = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        correct += pred[i] == gold[i] ? 1 : 0;
    }
    return ratio(correct, pred.size());
}

std::vector<ClassMetrics> per_class_metrics(
    const std::vector<std::string>& pred, const std::vector<std::string>& gold,
    const LabelSchema& schema) {
    return metrics_from_confusion(confusion_matrix(pred, gold, schema), schema);
}

double weighted_f1(const std::vector<std::string>& pred,
                   const std::vector<std::string>& gold,
                   const LabelSchema& schema) {
    const auto per_class = per_class_metrics(pred, gold, schema);
    double sum = 0.0;
    for (const auto& m : per_class) {
        sum += ratio(m.support, gold.size()) * m.f1;
    }
    return sum;
}

double macro_f1(const std::vector<std::string>& pred,
                const std::vector<std::string>& gold,
                const LabelSchema& schema) {
    const auto per_class = per_class_metrics(pred, gold, schema);
    double sum = 0.0;
    for (const auto& m : per_class) {
        sum += m.f1;
    }
    return sum / static_cast<double>(per_class.size());
}

double micro_f1(const std::vector<std::string>& pred,
                const std::vector<std::string>& gold,
                const LabelSchema& schema) {
    const auto per_class = per_class_metrics(pred, gold, schema);
    size_t tp = 0;
    size_t fp = 0;
    size_t fn = 0;
    for (const auto& m : per_class) {
        tp += m.tp;
        fp += m.fp;
        fn += m.fn;
    }
    return harmonic(ratio(tp, tp + fp), ratio(tp, tp + fn));
}

EvalReport build_report(const std::vector<ClassificationOutcome>& outcomes,
                        const LabelSchema& schema, uint64_t seed) {
    EvalReport report;
    report.labels = schema.labels();
    report.run_metadata.seed = seed;

    std::vector<std::string> pred;
    std::vector<std::string> gold;
    for (const auto& outcome : outcomes) {
        if (!outcome.gold_label) {
            throw Error("outcome '" + outcome.example_id +
                        "' has no gold label to score against");
        }
        if (outcome.unresolved) {
            report.alignment_stats.unresolved += 1;
        } else {
            // Canonical display names so raw strings compare cleanly.
            pred.push_back(
                schema.label(label_index(schema, outcome.predicted_label)));
            gold.push_back(
                schema.label(label_index(schema, *outcome.gold_label)));
            if (outcome.alignment) {
                (outcome.alignment->stage == AlignmentStage::rule
                     ? report.alignment_stats.rule_stage
                     : report.alignment_stats.similarity_stage) += 1;
            } else if (!outcome.choices.empty()) {
                report.alignment_stats.choice += 1;
            }
        }
        for (const auto& t : outcome.transcripts) {
            auto& meta = report.run_metadata;
            if (meta.started_at.empty() || t.timestamp < meta.started_at) {
                meta.started_at = t.timestamp;
            }
            if (meta.finished_at.empty() || t.timestamp > meta.finished_at) {
                meta.finished_at = t.timestamp;
            }
        }
    }
    if (pred.empty()) {
        throw Error("no resolved outcomes to score");
    }
    report.scored = pred.size();
    report.confusion = confusion_matrix(pred, gold, schema);
    report.per_class = metrics_from_confusion(report.confusion, schema);
    report.accuracy = accuracy(pred, gold);
    report.weighted_f1 = weighted_f1(pred, gold, schema);
    report.macro_f1 = macro_f1(pred, gold, schema);
    report.micro_f1 = micro_f1(pred, gold, schema);

    const auto& first = outcomes.front();
    const bool mixed_strategy =
        std::any_of(outcomes.begin(), outcomes.end(), [&](const auto& o) {
            return o.strategy != first.strategy;
        });
    const bool mixed_template =
        std::any_of(outcomes.begin(), outcomes.end(), [&](const auto& o) {
            return o.template_id != first.template_id;
        });
    report.run_metadata.strategy =
        mixed_strategy ? "mixed" : to_string(first.strategy);
    report.run_metadata.template_id =
        mixed_template ? "mixed" : first.template_id;
    for (const auto& outcome : outcomes) {
        if (!outcome.transcripts.empty()) {
            report.run_metadata.model =
                outcome.transcripts.front().request.model;
            break;
        }
    }
    return report;
}

json to_json(const EvalReport& report) {
    json per_class = json::array();
    for (const auto& m : report.per_class) {
        per_class.push_back({{"label", m.label},
                             {"support", m.support},
                             {"tp", m.tp},
                             {"fp", m.fp},
                             {"fn", m.fn},
                             {"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1}});
    }
    json confusion = json::array();
    for (const auto& row : report.confusion) {
        confusion.push_back(row);
    }
    json doc;
    doc["labels"] = report.labels;
    doc["scored"] = report.scored;
    doc["accuracy"] = report.accuracy;
    doc["per_class"] = std::move(per_class);
    doc["weighted_f1"] = report.weighted_f1;
    doc["macro_f1"] = report.macro_f1;
    doc["micro_f1"] = report.micro_f1;
    doc["confusion"] = std::move(confusion);
    doc["alignment_stats"] = {
        {"rule_stage", report.alignment_stats.rule_stage},
        {"similarity_stage", report.alignment_stats.similarity_stage},
        {"choice", report.alignment_stats.choice},
        {"unresolved", report.alignment_stats.unresolved},
    };
    doc["run_metadata"] = {
        {"strategy", report.run_metadata.strategy},
        {"template_id", report.run_metadata.template_id},
        {"model", report.run_metadata.model},
        {"seed", report.run_metadata.seed},
        {"started_at", report.run_metadata.started_at},
        {"finished_at", report.run_metadata.finished_at},
    };
    return doc;
}

namespace {

std::string fixed(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", value);
    return buf;
}

void pad_to(std::string& line, size_t width) {
    while (line.size() < width) {
        line.push_back(' ');
    }
}

}  // namespace

std::string report_to_text(const EvalReport& report) {
    size_t label_width = 5;
    for (const auto& label : report.labels) {
        label_width = std::max(label_width, label.size());
    }
    std::string out;
    out += "strategy: " + report.run_metadata.strategy +
           "  template: " + report.run_metadata.template_id +
           "  model: " + report.run_metadata.model +
           "  seed: " + std::to_string(report.run_metadata.seed) + "\n";
    out += "examples scored: " + std::to_string(report.scored) +
           "  unresolved: " +
           std::to_string(report.alignment_stats.unresolved) + "\n\n";

    std::string header = "label";
    pad_to(header, label_width);
    out += header + "  support  precision  recall      f1\n";
    for (const auto& m : report.per_class) {
        std::string line = m.label;
        pad_to(line, label_width);
        std::string support = std::to_string(m.support);
        while (support.size() < 7) {
            support.insert(support.begin(), ' ');
        }
        out += line + "  " + support + "     " + fixed(m.precision) + "  " +
               fixed(m.recall) + "  " + fixed(m.f1) + "\n";
    }
    out += "\n";
    out += "accuracy     " + fixed(report.accuracy) + "\n";
    out += "weighted-F1  " + fixed(report.weighted_f1) + "\n";
    out += "macro-F1     " + fixed(report.macro_f1) + "\n";
    out += "micro-F1     " + fixed(report.micro_f1) + "\n\n";

    out += "confusion (rows = gold, columns = predicted)\n";
    std::string axis;
    pad_to(axis, label_width);
    for (const auto& label : report.labels) {
        std::string cell = label;
        while (cell.size() < label_width) {
            cell.insert(cell.begin(), ' ');
        }
        axis += "  " + cell;
    }
    out += axis + "\n";
    for (size_t r = 0; r < report.confusion.size(); ++r) {
        std::string line = report.labels[r];
        pad_to(line, label_width);
        for (size_t c = 0; c < report.confusion[r].size(); ++c) {
            std::string cell = std::to_string(report.confusion[r][c]);
            while (cell.size() < label_width) {
                cell.insert(cell.begin(), ' ');
            }
            line += "  " + cell;
        }
        out += line + "\n";
    }
    out += "\n";
    out += "alignment: rule=" +
           std::to_string(report.alignment_stats.rule_stage) +
           " similarity=" +
           std::to_string(report.alignment_stats.similarity_stage) +
           " choice=" + std::to_string(report.alignment_stats.choice) +
           " unresolved=" +
           std::to_string(report.alignment_stats.unresolved) + "\n";
    return out;
}

}  // namespace chatagri
