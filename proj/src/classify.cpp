#include "chatagri/classify.hpp"

#include <algorithm>

#include "chatagri/error.hpp"

namespace chatagri {

using nlohmann::json;

json to_json(const ClassificationOutcome& outcome) {
    json doc;
    doc["example_id"] = outcome.example_id;
    if (outcome.gold_label) {
        doc["gold_label"] = *outcome.gold_label;
    }
    if (!outcome.unresolved) {
        doc["predicted_label"] = outcome.predicted_label;
    }
    doc["strategy"] = to_string(outcome.strategy);
    doc["template_id"] = outcome.template_id;
    doc["turn_count"] = outcome.turn_count;
    json transcripts = json::array();
    for (const auto& t : outcome.transcripts) {
        transcripts.push_back(to_json(t));
    }
    doc["transcripts"] = std::move(transcripts);
    if (outcome.alignment) {
        doc["alignment"] = to_json(*outcome.alignment);
    }
    if (!outcome.choices.empty()) {
        json choices = json::array();
        for (const auto& c : outcome.choices) {
            json offered = json::array();
            for (const auto& [letter, label] : c.offered) {
                offered.push_back({{"letter", letter}, {"label", label}});
            }
            choices.push_back({{"turn_index", c.turn_index},
                               {"letter", c.letter},
                               {"label", c.label},
                               {"offered", std::move(offered)}});
        }
        doc["choices"] = std::move(choices);
    }
    if (outcome.unresolved) {
        doc["unresolved"] = true;
        doc["failure_reason"] = outcome.failure_reason;
    }
    return doc;
}

ClassificationOutcome outcome_from_json(const json& doc) {
    ClassificationOutcome outcome;
    try {
        outcome.example_id = doc.at("example_id").get<std::string>();
        if (doc.contains("gold_label")) {
            outcome.gold_label = doc["gold_label"].get<std::string>();
        }
        outcome.unresolved = doc.value("unresolved", false);
        if (!outcome.unresolved) {
            outcome.predicted_label =
                doc.at("predicted_label").get<std::string>();
        }
        outcome.failure_reason = doc.value("failure_reason", std::string{});
        outcome.strategy = parse_strategy(doc.at("strategy").get<std::string>());
        outcome.template_id = doc.value("template_id", std::string{});
        outcome.turn_count = doc.value("turn_count", size_t{0});
        for (const auto& t : doc.value("transcripts", json::array())) {
            outcome.transcripts.push_back(transcript_from_json(t));
        }
        if (doc.contains("alignment")) {
            outcome.alignment = alignment_result_from_json(doc["alignment"]);
        }
        for (const auto& c : doc.value("choices", json::array())) {
            ChoiceRecord record;
            record.turn_index = c.at("turn_index").get<size_t>();
            record.letter = c.at("letter").get<std::string>();
            record.label = c.at("label").get<std::string>();
            for (const auto& o : c.value("offered", json::array())) {
                record.offered.emplace_back(o.at("letter").get<std::string>(),
                                            o.at("label").get<std::string>());
            }
            outcome.choices.push_back(std::move(record));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string{"bad outcome record: "} + e.what());
    }
    return outcome;
}

namespace {

std::string letter_for(size_t i) {
    return std::string(1, static_cast<char>('A' + i));
}

void require_pivots(const LabelSchema& schema) {
    if (!schema.has_all_pivots()) {
        for (size_t i = 0; i < schema.size(); ++i) {
            if (!schema.pivot(i)) {
                throw Error("similarity strategies need a pivot sentence for "
                            "every label; '" +
                            schema.label(i) + "' has none");
            }
        }
    }
}

}  // namespace

ClassificationOutcome classify_single(const LabeledExample& example,
                                      const PromptTemplate& tmpl,
                                      const LabelSchema& schema,
                                      Backend& backend,
                                      const std::vector<AlignmentRule>& rules,
                                      const InferenceOptions& options) {
    if (is_similarity(tmpl.strategy)) {
        throw Error("classify_single covers the single-sentence strategies; "
                    "got '" +
                    to_string(tmpl.strategy) + "'");
    }
    const auto prompt = render_prompt(tmpl, example.text, schema, example.id);
    auto transcript = backend.complete(make_request(options, prompt.text));
    auto result = align(transcript.response_text, rules, schema);

    ClassificationOutcome outcome;
    outcome.example_id = example.id;
    outcome.gold_label = example.gold_label;
    outcome.predicted_label = result.label;
    outcome.strategy = tmpl.strategy;
    outcome.template_id = tmpl.id;
    outcome.transcripts.push_back(std::move(transcript));
    outcome.alignment = std::move(result);
    outcome.turn_count = 1;
    return outcome;
}

ClassificationOutcome classify_similarity_direct(
    const LabeledExample& example, const LabelSchema& schema, Backend& backend,
    const std::vector<AlignmentRule>& rules, const InferenceOptions& options,
    const PromptTemplate* tmpl) {
    require_pivots(schema);
    std::vector<std::pair<std::string, std::string>> lettered_pivots;
    std::vector<std::pair<std::string, std::string>> lettered_labels;
    for (size_t i = 0; i < schema.size(); ++i) {
        lettered_pivots.emplace_back(letter_for(i), *schema.pivot(i));
        lettered_labels.emplace_back(letter_for(i), schema.label(i));
    }
    RenderedPrompt prompt;
    if (tmpl) {
        std::vector<std::string> pivots;
        for (auto& [_, sentence] : lettered_pivots) {
            pivots.push_back(sentence);
        }
        prompt = render_similarity_template(*tmpl, example.text, pivots,
                                            example.id);
    } else {
        prompt =
            render_similarity_direct(example.text, lettered_pivots, example.id);
    }
    auto transcript = backend.complete(make_request(options, prompt.text));
    const std::string label =
        align_choice(transcript.response_text, lettered_labels, rules);

    ClassificationOutcome outcome;
    outcome.example_id = example.id;
    outcome.gold_label = example.gold_label;
    outcome.predicted_label = label;
    outcome.strategy = Strategy::similarity_direct;
    outcome.template_id = prompt.template_id;
    outcome.transcripts.push_back(std::move(transcript));
    ChoiceRecord record;
    record.turn_index = 0;
    record.label = label;
    for (const auto& [letter, l] : lettered_labels) {
        if (l == label) {
            record.letter = letter;
            break;
        }
    }
    record.offered = lettered_labels;
    outcome.choices.push_back(std::move(record));
    outcome.turn_count = 1;
    return outcome;
}

ClassificationOutcome classify_similarity_progressive(
    const LabeledExample& example, const LabelSchema& schema, Backend& backend,
    const std::vector<AlignmentRule>& rules, const InferenceOptions& options,
    const PromptTemplate* tmpl) {
    require_pivots(schema);

    ClassificationOutcome outcome;
    outcome.example_id = example.id;
    outcome.gold_label = example.gold_label;
    outcome.strategy = Strategy::similarity_progressive;
    outcome.template_id = tmpl ? tmpl->id : "similarity-pair";

    // The incumbent is always letter A, the schema-order challenger B.
    size_t champion = 0;
    for (size_t challenger = 1; challenger < schema.size(); ++challenger) {
        const size_t turn = challenger - 1;
        RenderedPrompt prompt;
        if (tmpl) {
            prompt = render_similarity_template(
                *tmpl, example.text,
                {*schema.pivot(champion), *schema.pivot(challenger)},
                example.id, turn);
        } else {
            prompt = render_similarity_pair(example.text,
                                            *schema.pivot(champion),
                                            *schema.pivot(challenger),
                                            example.id, turn);
        }
        auto transcript = backend.complete(make_request(options, prompt.text));
        const std::vector<std::pair<std::string, std::string>> offered = {
            {"A", schema.label(champion)},
            {"B", schema.label(challenger)},
        };
        const std::string label =
            align_choice(transcript.response_text, offered, rules);
        outcome.transcripts.push_back(std::move(transcript));
        ChoiceRecord record;
        record.turn_index = turn;
        record.label = label;
        record.letter = label == offered[0].second ? "A" : "B";
        record.offered = offered;
        const bool challenger_wins = record.letter == "B";
        outcome.choices.push_back(std::move(record));
        if (challenger_wins) {
            champion = challenger;
        }
        outcome.turn_count = turn + 1;
    }
    outcome.predicted_label = schema.label(champion);
    return outcome;
}

ClassificationOutcome classify_example(const LabeledExample& example,
                                       Strategy strategy,
                                       const PromptTemplate* tmpl,
                                       const LabelSchema& schema,
                                       Backend& backend,
                                       const std::vector<AlignmentRule>& rules,
                                       const InferenceOptions& options) {
    switch (strategy) {
        case Strategy::similarity_direct:
            return classify_similarity_direct(example, schema, backend, rules,
                                              options, tmpl);
        case Strategy::similarity_progressive:
            return classify_similarity_progressive(example, schema, backend,
                                                   rules, options, tmpl);
        default:
            if (!tmpl) {
                throw Error("strategy '" + to_string(strategy) +
                            "' needs a prompt template");
            }
            return classify_single(example, *tmpl, schema, backend, rules,
                                   options);
    }
}

}  // namespace chatagri
