#include "chatagri/alignment.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "chatagri/error.hpp"
#include "chatagri/text.hpp"

namespace chatagri {

using nlohmann::json;

size_t levenshtein(std::string_view a, std::string_view b) {
    const std::u32string ua = text::decode_utf8(a);
    const std::u32string ub = text::decode_utf8(b);
    if (ua.empty()) {
        return ub.size();
    }
    if (ub.empty()) {
        return ua.size();
    }
    std::vector<size_t> prev(ub.size() + 1);
    std::vector<size_t> cur(ub.size() + 1);
    std::iota(prev.begin(), prev.end(), size_t{0});
    for (size_t i = 1; i <= ua.size(); ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= ub.size(); ++j) {
            const size_t sub = prev[j - 1] + (ua[i - 1] == ub[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[ub.size()];
}

RuleKind parse_rule_kind(std::string_view name) {
    if (name == "cue_phrase") {
        return RuleKind::cue_phrase;
    }
    if (name == "label_mention") {
        return RuleKind::label_mention;
    }
    throw ParseError("unknown rule kind '" + std::string(name) + "'");
}

std::string to_string(RuleKind kind) {
    return kind == RuleKind::cue_phrase ? "cue_phrase" : "label_mention";
}

std::string to_string(AlignmentStage stage) {
    return stage == AlignmentStage::rule ? "rule" : "similarity";
}

void validate_rules(const std::vector<AlignmentRule>& rules) {
    std::unordered_set<int> priorities;
    for (const auto& rule : rules) {
        if (rule.id.empty()) {
            throw ParseError("alignment rule with empty id");
        }
        if (!priorities.insert(rule.priority).second) {
            throw ParseError("duplicate rule priority " +
                             std::to_string(rule.priority) + " (rule '" +
                             rule.id + "')");
        }
        if (rule.kind == RuleKind::cue_phrase) {
            const auto first = rule.pattern.find("{X}");
            if (first == std::string::npos ||
                rule.pattern.find("{X}", first + 1) != std::string::npos) {
                throw ParseError("cue rule '" + rule.id +
                                 "' needs exactly one {X} slot");
            }
        }
    }
}

std::vector<AlignmentRule> default_rules() {
    return {
        {"cue-category-colon", RuleKind::cue_phrase, "Category: {X}", 10},
        {"cue-category-is", RuleKind::cue_phrase, "category is {X}", 20},
        {"cue-classified-as", RuleKind::cue_phrase, "classified as {X}", 30},
        {"cue-belongs-to", RuleKind::cue_phrase, "belongs to {X}", 40},
        {"cue-answer-colon", RuleKind::cue_phrase, "Answer: {X}", 50},
        {"label-mention", RuleKind::label_mention, "", 100},
    };
}

std::vector<AlignmentRule> load_rules(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open rules file: " + path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("rules file " + path.string() + ": " + e.what());
    }
    if (!doc.is_array()) {
        throw ParseError("rules file " + path.string() +
                         ": expected a JSON list");
    }
    std::vector<AlignmentRule> rules;
    for (const auto& row : doc) {
        AlignmentRule rule;
        try {
            rule.id = row.at("id").get<std::string>();
            rule.kind = parse_rule_kind(row.at("kind").get<std::string>());
            rule.pattern = row.value("pattern", std::string{});
            rule.priority = row.at("priority").get<int>();
        } catch (const json::exception& e) {
            throw ParseError("rules file " + path.string() + ": " + e.what());
        }
        rules.push_back(std::move(rule));
    }
    validate_rules(rules);
    return rules;
}

void save_rules(const std::filesystem::path& path,
                const std::vector<AlignmentRule>& rules) {
    json doc = json::array();
    for (const auto& rule : rules) {
        doc.push_back({{"id", rule.id},
                       {"kind", to_string(rule.kind)},
                       {"pattern", rule.pattern},
                       {"priority", rule.priority}});
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ParseError("cannot write rules file: " + path.string());
    }
    out << doc.dump(2) << '\n';
}

json to_json(const AlignmentResult& result) {
    json doc;
    doc["label"] = result.label;
    doc["stage"] = to_string(result.stage);
    if (result.rule_id) {
        doc["rule_id"] = *result.rule_id;
    }
    if (result.distance) {
        doc["distance"] = *result.distance;
    }
    if (!result.candidates.empty()) {
        json cands = json::array();
        for (const auto& [label, distance] : result.candidates) {
            cands.push_back({{"label", label}, {"distance", distance}});
        }
        doc["candidates"] = std::move(cands);
    }
    doc["levenshtein_evals"] = result.levenshtein_evals;
    return doc;
}

AlignmentResult alignment_result_from_json(const json& doc) {
    AlignmentResult result;
    try {
        result.label = doc.at("label").get<std::string>();
        const auto stage = doc.at("stage").get<std::string>();
        if (stage == "rule") {
            result.stage = AlignmentStage::rule;
        } else if (stage == "similarity") {
            result.stage = AlignmentStage::similarity;
        } else {
            throw ParseError("unknown alignment stage '" + stage + "'");
        }
        if (doc.contains("rule_id")) {
            result.rule_id = doc["rule_id"].get<std::string>();
        }
        if (doc.contains("distance")) {
            result.distance = doc["distance"].get<size_t>();
        }
        for (const auto& row : doc.value("candidates", json::array())) {
            result.candidates.emplace_back(row.at("label").get<std::string>(),
                                           row.at("distance").get<size_t>());
        }
        result.levenshtein_evals = doc.value("levenshtein_evals", size_t{0});
    } catch (const json::exception& e) {
        throw ParseError(std::string{"bad alignment result: "} + e.what());
    }
    return result;
}

namespace {

// Matching works on a folded copy of the answer with whitespace runs
// collapsed but line breaks kept, so cue captures can stop at end of line.
std::u32string match_text(std::string_view raw) {
    const std::u32string decoded = text::decode_utf8(raw);
    std::u32string out;
    out.reserve(decoded.size());
    size_t i = 0;
    while (i < decoded.size()) {
        if (!text::is_space(decoded[i])) {
            out.push_back(text::fold_char(decoded[i]));
            ++i;
            continue;
        }
        bool newline = false;
        while (i < decoded.size() && text::is_space(decoded[i])) {
            newline = newline || decoded[i] == U'\n';
            ++i;
        }
        if (!out.empty() && i < decoded.size()) {
            out.push_back(newline ? U'\n' : U' ');
        }
    }
    return out;
}

std::string normalize_fragment(const std::u32string& fragment) {
    return text::normalize_answer(text::encode_utf8(fragment));
}

// Normalized answer text -> label index; earliest schema label wins clashes.
std::unordered_map<std::string, size_t> resolution_map(
    const LabelSchema& schema) {
    std::unordered_map<std::string, size_t> map;
    for (size_t i = 0; i < schema.size(); ++i) {
        map.emplace(schema.normalized_key(i), i);
        for (const auto& answer : schema.pivot_answers(i)) {
            const std::string key = text::normalize_answer(answer);
            if (!key.empty()) {
                map.emplace(key, i);
            }
        }
    }
    return map;
}

bool word_bounded(const std::u32string& haystack, size_t pos, size_t len) {
    if (pos > 0 && text::is_word_char(haystack[pos - 1])) {
        return false;
    }
    const size_t end = pos + len;
    return end >= haystack.size() || !text::is_word_char(haystack[end]);
}

// Last cue occurrence whose capture resolves to a schema label. Captures run
// from the end of the prefix to the suffix, or to end of line when the rule
// has no suffix.
std::optional<size_t> match_cue(
    const std::u32string& haystack, const std::string& pattern,
    const std::unordered_map<std::string, size_t>& resolve) {
    const size_t slot = pattern.find("{X}");
    const std::u32string prefix = match_text(pattern.substr(0, slot));
    const std::u32string suffix = match_text(pattern.substr(slot + 3));
    std::optional<size_t> winner;
    const auto try_capture = [&](size_t from, size_t to) {
        const std::string key =
            normalize_fragment(haystack.substr(from, to - from));
        if (key.empty()) {
            return;
        }
        if (auto it = resolve.find(key); it != resolve.end()) {
            winner = it->second;
        }
    };
    if (prefix.empty() && suffix.empty()) {
        try_capture(0, haystack.size());
        return winner;
    }
    if (prefix.empty()) {
        // Capture runs from the start of the suffix's line.
        for (size_t q = haystack.find(suffix); q != std::u32string::npos;
             q = haystack.find(suffix, q + 1)) {
            const size_t bol = haystack.rfind(U'\n', q);
            try_capture(bol == std::u32string::npos ? 0 : bol + 1, q);
        }
        return winner;
    }
    for (size_t p = haystack.find(prefix); p != std::u32string::npos;
         p = haystack.find(prefix, p + 1)) {
        const size_t start = p + prefix.size();
        size_t end;
        if (suffix.empty()) {
            end = haystack.find(U'\n', start);
            if (end == std::u32string::npos) {
                end = haystack.size();
            }
        } else {
            end = haystack.find(suffix, start);
            if (end == std::u32string::npos) {
                continue;
            }
        }
        try_capture(start, end);
    }
    return winner;
}

// Earliest word-bounded occurrence of any pivot answer; schema order breaks
// positional ties.
std::optional<size_t> match_mention(const std::u32string& haystack,
                                    const LabelSchema& schema) {
    std::optional<size_t> best_label;
    size_t best_pos = std::u32string::npos;
    for (size_t i = 0; i < schema.size(); ++i) {
        for (const auto& answer : schema.pivot_answers(i)) {
            const std::u32string needle =
                text::decode_utf8(text::normalize_answer(answer));
            if (needle.empty()) {
                continue;
            }
            for (size_t p = haystack.find(needle); p != std::u32string::npos;
                 p = haystack.find(needle, p + 1)) {
                if (!word_bounded(haystack, p, needle.size())) {
                    continue;
                }
                if (p < best_pos) {
                    best_pos = p;
                    best_label = i;
                }
                break;
            }
        }
    }
    return best_label;
}

}  // namespace

std::optional<std::pair<std::string, std::string>> align_rule(
    std::string_view answer, const std::vector<AlignmentRule>& rules,
    const LabelSchema& schema) {
    validate_rules(rules);
    std::vector<const AlignmentRule*> ordered;
    ordered.reserve(rules.size());
    for (const auto& rule : rules) {
        ordered.push_back(&rule);
    }
    std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
        return a->priority < b->priority;
    });
    const std::u32string haystack = match_text(answer);
    const auto resolve = resolution_map(schema);
    for (const auto* rule : ordered) {
        const std::optional<size_t> hit =
            rule->kind == RuleKind::cue_phrase
                ? match_cue(haystack, rule->pattern, resolve)
                : match_mention(haystack, schema);
        if (hit) {
            return std::make_pair(schema.label(*hit), rule->id);
        }
    }
    return std::nullopt;
}

AlignmentResult align_similarity(std::string_view answer,
                                 const LabelSchema& schema) {
    const std::string normalized = text::normalize_answer(answer);
    AlignmentResult result;
    result.stage = AlignmentStage::similarity;
    size_t best = 0;
    for (size_t i = 0; i < schema.size(); ++i) {
        const auto& answers = schema.pivot_answers(i);
        if (answers.empty()) {
            throw Error("label '" + schema.label(i) + "' has no pivot answers");
        }
        size_t score = std::string::npos;
        for (const auto& pivot : answers) {
            const size_t d =
                levenshtein(normalized, text::normalize_answer(pivot));
            ++result.levenshtein_evals;
            score = std::min(score, d);
        }
        result.candidates.emplace_back(schema.label(i), score);
        if (score < result.candidates[best].second) {
            best = i;
        }
    }
    result.label = schema.label(best);
    result.distance = result.candidates[best].second;
    return result;
}

AlignmentResult align(std::string_view answer,
                      const std::vector<AlignmentRule>& rules,
                      const LabelSchema& schema) {
    if (auto hit = align_rule(answer, rules, schema)) {
        AlignmentResult result;
        result.label = std::move(hit->first);
        result.stage = AlignmentStage::rule;
        result.rule_id = std::move(hit->second);
        return result;
    }
    return align_similarity(answer, schema);
}

std::string align_choice(
    std::string_view answer,
    const std::vector<std::pair<std::string, std::string>>& letters) {
    return align_choice(answer, letters, default_rules());
}

std::string align_choice(
    std::string_view answer,
    const std::vector<std::pair<std::string, std::string>>& letters,
    const std::vector<AlignmentRule>& fallback_rules) {
    if (letters.size() < 2) {
        throw Error("align_choice needs at least 2 choices");
    }
    const std::u32string haystack = match_text(answer);
    std::vector<std::u32string> needles;
    for (const auto& [letter, _] : letters) {
        needles.push_back(match_text(letter));
    }
    // First word-bounded choice letter anywhere in the answer.
    for (size_t pos = 0; pos < haystack.size(); ++pos) {
        for (size_t c = 0; c < needles.size(); ++c) {
            const auto& needle = needles[c];
            if (needle.empty() ||
                haystack.compare(pos, needle.size(), needle) != 0) {
                continue;
            }
            if (word_bounded(haystack, pos, needle.size())) {
                return letters[c].second;
            }
        }
    }
    std::vector<std::string> labels;
    for (const auto& [_, label] : letters) {
        if (std::find(labels.begin(), labels.end(), label) == labels.end()) {
            labels.push_back(label);
        }
    }
    if (labels.size() < 2) {
        return labels.front();
    }
    // No letter present; fall back to the rule stage over the listed labels.
    // Similarity stays off here so a noncommittal reply surfaces as an error
    // instead of an arbitrary nearest label.
    const LabelSchema sub{labels};
    if (auto hit = align_rule(answer, fallback_rules, sub)) {
        return hit->first;
    }
    std::string shown{answer.substr(0, 120)};
    throw UnresolvableAnswerError("cannot map answer to a choice: \"" + shown +
                                  "\"");
}

}  // namespace chatagri
