#include "chatagri/prompting.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "chatagri/error.hpp"
#include "chatagri/text.hpp"

namespace chatagri {

using nlohmann::json;

Strategy parse_strategy(std::string_view name) {
    if (name == "manual") {
        return Strategy::manual;
    }
    if (name == "model_triggered") {
        return Strategy::model_triggered;
    }
    if (name == "similarity_direct") {
        return Strategy::similarity_direct;
    }
    if (name == "similarity_progressive") {
        return Strategy::similarity_progressive;
    }
    if (name == "chain_of_thought") {
        return Strategy::chain_of_thought;
    }
    throw ParseError("unknown strategy '" + std::string(name) + "'");
}

std::string to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::manual:
            return "manual";
        case Strategy::model_triggered:
            return "model_triggered";
        case Strategy::similarity_direct:
            return "similarity_direct";
        case Strategy::similarity_progressive:
            return "similarity_progressive";
        default:
            return "chain_of_thought";
    }
}

bool is_similarity(Strategy strategy) {
    return strategy == Strategy::similarity_direct ||
           strategy == Strategy::similarity_progressive;
}

namespace {

size_t count_occurrences(std::string_view hay, std::string_view needle) {
    size_t count = 0;
    for (size_t p = hay.find(needle); p != std::string_view::npos;
         p = hay.find(needle, p + 1)) {
        ++count;
    }
    return count;
}

std::string indexed_slot(size_t i) {
    return "[SENT" + std::to_string(i) + "]";
}

bool has_indexed_slot(std::string_view body) {
    for (size_t p = body.find("[SENT"); p != std::string_view::npos;
         p = body.find("[SENT", p + 1)) {
        const size_t d = p + 5;
        if (d < body.size() && body[d] >= '0' && body[d] <= '9') {
            return true;
        }
    }
    return false;
}

void replace_first(std::string& text, std::string_view token,
                   std::string_view value) {
    const size_t p = text.find(token);
    if (p == std::string::npos) {
        throw Error("slot " + std::string(token) + " missing at render time");
    }
    text.replace(p, token.size(), value);
}

}  // namespace

void validate_template(const PromptTemplate& tmpl) {
    std::vector<std::string> problems;
    if (tmpl.id.empty()) {
        problems.push_back("template id is empty");
    }
    if (is_similarity(tmpl.strategy)) {
        if (count_occurrences(tmpl.body, "[SENT0]") != 1) {
            problems.push_back("similarity body needs [SENT0] exactly once");
        }
        size_t k = 0;
        while (count_occurrences(tmpl.body, indexed_slot(k + 1)) == 1) {
            ++k;
        }
        if (k < 2) {
            problems.push_back(
                "similarity body needs at least pivot slots [SENT1] and "
                "[SENT2], each exactly once");
        }
        // Any further [SENTi] is either a duplicate or skips an index.
        for (size_t i = k + 1; i <= 99; ++i) {
            if (count_occurrences(tmpl.body, indexed_slot(i)) != 0) {
                problems.push_back("pivot slots must be contiguous and "
                                   "unique; stray " +
                                   indexed_slot(i));
                break;
            }
        }
        if (count_occurrences(tmpl.body, "[SENT]") != 0 ||
            count_occurrences(tmpl.body, "[CATE]") != 0) {
            problems.push_back(
                "similarity bodies take [SENTn] slots, not [SENT]/[CATE]");
        }
    } else {
        if (count_occurrences(tmpl.body, "[SENT]") != 1) {
            problems.push_back("body needs [SENT] exactly once");
        }
        if (count_occurrences(tmpl.body, "[CATE]") != 1) {
            problems.push_back("body needs [CATE] exactly once");
        }
        if (has_indexed_slot(tmpl.body)) {
            problems.push_back(
                "indexed [SENTn] slots belong to similarity strategies");
        }
    }
    if (!problems.empty()) {
        std::string message = "template '" + tmpl.id + "': " + problems[0];
        for (size_t i = 1; i < problems.size(); ++i) {
            message += "; " + problems[i];
        }
        throw ParseError(message);
    }
}

size_t pivot_slot_count(const PromptTemplate& tmpl) {
    validate_template(tmpl);
    if (!is_similarity(tmpl.strategy)) {
        return 0;
    }
    size_t k = 0;
    while (count_occurrences(tmpl.body, indexed_slot(k + 1)) == 1) {
        ++k;
    }
    return k;
}

std::vector<PromptTemplate> builtin_templates() {
    // The first two reproduce the published manual templates verbatim; the
    // "selected" pair are the configurations the experiments settled on.
    return {
        {"manual-1", Strategy::manual,
         "Classify the following sentence into one of the given categories: "
         "[CATE]\nSentence: [SENT]\nCategory:",
         false},
        {"manual-2", Strategy::manual,
         "Which categories do you think sentence:\n[SENT]\nbelongs to, out "
         "of [CATE]?",
         false},
        {"manual-selected", Strategy::manual,
         "Classify the following sentence into one of the given categories: "
         "[CATE]\nSentence: [SENT]\nCategory:",
         true},
        {"triggered-selected", Strategy::model_triggered,
         "Classify the agricultural text: [SENT] according to its main topic "
         "[CATE].",
         true},
    };
}

std::optional<PromptTemplate> find_builtin(std::string_view id) {
    for (auto& tmpl : builtin_templates()) {
        if (tmpl.id == id) {
            return tmpl;
        }
    }
    return std::nullopt;
}

json to_json(const PromptTemplate& tmpl) {
    json doc;
    doc["id"] = tmpl.id;
    doc["strategy"] = to_string(tmpl.strategy);
    doc["body"] = tmpl.body;
    doc["suppress_explanation"] = tmpl.suppress_explanation;
    if (tmpl.repaired) {
        doc["repaired"] = true;
    }
    return doc;
}

PromptTemplate template_from_json(const json& doc) {
    PromptTemplate tmpl;
    try {
        tmpl.id = doc.at("id").get<std::string>();
        tmpl.strategy = parse_strategy(doc.at("strategy").get<std::string>());
        tmpl.body = doc.at("body").get<std::string>();
        const bool default_suppress = tmpl.strategy == Strategy::manual ||
                                      tmpl.strategy == Strategy::model_triggered;
        tmpl.suppress_explanation =
            doc.value("suppress_explanation", default_suppress);
        tmpl.repaired = doc.value("repaired", false);
    } catch (const json::exception& e) {
        throw ParseError(std::string{"bad template: "} + e.what());
    }
    validate_template(tmpl);
    return tmpl;
}

PromptTemplate load_template(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open template file: " + path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("template file " + path.string() + ": " + e.what());
    }
    return template_from_json(doc);
}

void save_template(const std::filesystem::path& path,
                   const PromptTemplate& tmpl) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ParseError("cannot write template file: " + path.string());
    }
    out << to_json(tmpl).dump(2) << '\n';
}

std::string join_alternatives(const std::vector<std::string>& names) {
    if (names.empty()) {
        throw Error("cannot join an empty alternative list");
    }
    if (names.size() == 1) {
        return names[0];
    }
    if (names.size() == 2) {
        return names[0] + " or " + names[1];
    }
    std::string out;
    for (size_t i = 0; i + 1 < names.size(); ++i) {
        out += names[i] + ", ";
    }
    out += "or " + names.back();
    return out;
}

RenderedPrompt render_prompt(const PromptTemplate& tmpl,
                             std::string_view sentence,
                             const LabelSchema& schema,
                             std::string_view example_id) {
    validate_template(tmpl);
    if (is_similarity(tmpl.strategy)) {
        throw Error("template '" + tmpl.id +
                    "' uses a similarity strategy; render_prompt handles "
                    "single-sentence strategies only");
    }
    if (text::trim_copy(std::string(sentence)).empty()) {
        throw Error("cannot render a prompt for an empty sentence");
    }
    std::string out = tmpl.body;
    // Categories first so a sentence containing slot-shaped text stays as-is.
    replace_first(out, "[CATE]", join_alternatives(schema.labels()));
    replace_first(out, "[SENT]", sentence);
    if (tmpl.strategy == Strategy::chain_of_thought) {
        out += "\n";
        out += chain_of_thought_clause;
    } else if (tmpl.suppress_explanation) {
        out += "\n";
        out += answer_suppressor;
    }
    return {std::move(out), tmpl.id, std::string(example_id), 0};
}

RenderedPrompt render_similarity_direct(
    std::string_view target,
    const std::vector<std::pair<std::string, std::string>>& pivots,
    std::string_view example_id) {
    if (pivots.size() < 2) {
        throw Error("direct similarity needs at least 2 pivot sentences");
    }
    if (pivots.size() > 26) {
        throw Error("similarity prompting supports at most 26 categories");
    }
    std::vector<std::string> letters;
    for (size_t i = 0; i < pivots.size(); ++i) {
        const std::string expected(1, static_cast<char>('A' + i));
        if (pivots[i].first != expected) {
            throw Error("pivot letters must run A, B, ... in order; got '" +
                        pivots[i].first + "' at position " + std::to_string(i));
        }
        if (text::trim_copy(pivots[i].second).empty()) {
            throw Error("missing pivot sentence for choice " + expected);
        }
        letters.push_back(expected);
    }
    std::string out = "Given sentence S: ";
    out += target;
    out += ", which sentence of ";
    for (size_t i = 0; i < pivots.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        out += pivots[i].first + ": " + pivots[i].second;
    }
    out += " do you think is most similar to sentence S? ";
    out += join_alternatives(letters);
    out += "?";
    return {std::move(out), "similarity-direct", std::string(example_id), 0};
}

RenderedPrompt render_similarity_pair(std::string_view target,
                                      std::string_view a, std::string_view b,
                                      std::string_view example_id,
                                      size_t turn_index) {
    if (a == b) {
        throw Error("tournament round needs two distinct pivot sentences");
    }
    std::string out = "Given sentence S: ";
    out += target;
    out += ", which sentence A: ";
    out += a;
    out += " and B: ";
    out += b;
    out += " do you think is more similar to sentence S?\n";
    out += "Please answer using only A and B.";
    return {std::move(out), "similarity-pair", std::string(example_id),
            turn_index};
}

RenderedPrompt render_similarity_template(const PromptTemplate& tmpl,
                                          std::string_view target,
                                          const std::vector<std::string>& pivots,
                                          std::string_view example_id,
                                          size_t turn_index) {
    const size_t k = pivot_slot_count(tmpl);
    if (k == 0) {
        throw Error("template '" + tmpl.id + "' is not a similarity template");
    }
    if (pivots.size() != k) {
        throw Error("template '" + tmpl.id + "' has " + std::to_string(k) +
                    " pivot slots but " + std::to_string(pivots.size()) +
                    " pivots were provided");
    }
    std::string out = tmpl.body;
    replace_first(out, "[SENT0]", target);
    for (size_t i = 1; i <= k; ++i) {
        replace_first(out, indexed_slot(i), pivots[i - 1]);
    }
    return {std::move(out), tmpl.id, std::string(example_id), turn_index};
}

namespace {

std::string number_word(size_t n) {
    static const std::array<const char*, 21> words = {
        "zero",    "one",     "two",       "three",    "four",
        "five",    "six",     "seven",     "eight",    "nine",
        "ten",     "eleven",  "twelve",    "thirteen", "fourteen",
        "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
        "twenty"};
    return n < words.size() ? words[n] : std::to_string(n);
}

// Accepts "1. text", "2) text", "- text", "* text" and "• text".
std::optional<std::string> list_item(const std::string& line) {
    std::string s = text::trim_copy(line);
    if (s.empty()) {
        return std::nullopt;
    }
    size_t p = 0;
    while (p < s.size() && s[p] >= '0' && s[p] <= '9') {
        ++p;
    }
    if (p > 0 && p < s.size() && (s[p] == '.' || s[p] == ')')) {
        return text::trim_copy(s.substr(p + 1));
    }
    if (s[0] == '-' || s[0] == '*') {
        return text::trim_copy(s.substr(1));
    }
    if (s.rfind("\xE2\x80\xA2", 0) == 0) {  // •
        return text::trim_copy(s.substr(3));
    }
    return std::nullopt;
}

std::string strip_quotes(std::string s) {
    static const std::array<std::pair<const char*, const char*>, 4> pairs = {{
        {"\"", "\""},
        {"'", "'"},
        {"\xE2\x80\x9C", "\xE2\x80\x9D"},  // curly double quotes
        {"\xE2\x80\x98", "\xE2\x80\x99"},  // curly single quotes
    }};
    for (const auto& [open, close] : pairs) {
        const size_t ol = std::char_traits<char>::length(open);
        const size_t cl = std::char_traits<char>::length(close);
        if (s.size() > ol + cl && s.rfind(open, 0) == 0 &&
            s.compare(s.size() - cl, cl, close) == 0) {
            return text::trim_copy(s.substr(ol, s.size() - ol - cl));
        }
    }
    return s;
}

}  // namespace

std::string trigger_meta_prompt(std::string_view task_name, size_t k) {
    std::string out = "Provide ";
    out += number_word(k);
    out += " concise prompts or templates that can make you deal with the ";
    out += task_name;
    out += " task.";
    return out;
}

std::vector<PromptTemplate> trigger_prompts(Backend& backend,
                                            std::string_view task_name,
                                            size_t k,
                                            const InferenceOptions& options) {
    if (k == 0) {
        throw Error("trigger_prompts needs k >= 1");
    }
    const auto transcript =
        backend.complete(make_request(options, trigger_meta_prompt(task_name, k)));
    std::istringstream reply(transcript.response_text);
    std::vector<PromptTemplate> templates;
    std::string line;
    while (std::getline(reply, line) && templates.size() < k) {
        auto item = list_item(line);
        if (!item) {
            continue;
        }
        std::string body = strip_quotes(std::move(*item));
        if (body.empty() || has_indexed_slot(body)) {
            continue;
        }
        const size_t sents = count_occurrences(body, "[SENT]");
        const size_t cates = count_occurrences(body, "[CATE]");
        if (sents > 1 || cates > 1) {
            continue;  // duplicated slots cannot be repaired by appending
        }
        PromptTemplate tmpl;
        tmpl.strategy = Strategy::model_triggered;
        tmpl.suppress_explanation = true;
        tmpl.repaired = sents == 0 || cates == 0;
        if (sents == 0) {
            body += " [SENT]";
        }
        if (cates == 0) {
            body += " [CATE]";
        }
        tmpl.body = std::move(body);
        tmpl.id = "triggered-" + std::to_string(templates.size() + 1);
        validate_template(tmpl);
        templates.push_back(std::move(tmpl));
    }
    if (templates.empty()) {
        throw ParseError("no candidate templates found in the model reply");
    }
    return templates;
}

json to_json(const PromptSelectionReport& report) {
    json candidates = json::array();
    for (const auto& c : report.candidates) {
        candidates.push_back({{"id", c.id},
                              {"body", c.body},
                              {"repaired", c.repaired},
                              {"correct", c.correct},
                              {"total", c.total},
                              {"accuracy", c.accuracy}});
    }
    json doc;
    doc["candidates"] = std::move(candidates);
    doc["selected_index"] = report.selected_index;
    doc["selected_id"] = report.candidates.empty()
                             ? std::string{}
                             : report.candidates[report.selected_index].id;
    doc["sample_size"] = report.sample_size;
    doc["seed"] = report.seed;
    return doc;
}

std::pair<PromptTemplate, PromptSelectionReport> select_best_prompt(
    const std::vector<PromptTemplate>& candidates,
    const std::vector<LabeledExample>& examples, const LabelSchema& schema,
    const std::vector<AlignmentRule>& rules, Backend& backend,
    const InferenceOptions& options, size_t n, uint64_t seed) {
    if (candidates.empty()) {
        throw Error("select_best_prompt needs at least one candidate");
    }
    for (const auto& ex : examples) {
        if (!ex.gold_label) {
            throw Error("select_best_prompt needs a gold label on every "
                        "example; '" +
                        ex.id + "' has none");
        }
    }
    const auto subset = sample_subset(examples, n, seed);
    PromptSelectionReport report;
    report.sample_size = subset.size();
    report.seed = seed;
    size_t best = 0;
    for (size_t ci = 0; ci < candidates.size(); ++ci) {
        const auto& tmpl = candidates[ci];
        size_t correct = 0;
        for (const auto& ex : subset) {
            const auto prompt = render_prompt(tmpl, ex.text, schema, ex.id);
            const auto transcript =
                backend.complete(make_request(options, prompt.text));
            const auto result = align(transcript.response_text, rules, schema);
            if (schema.index_of(result.label) ==
                schema.index_of(*ex.gold_label)) {
                ++correct;
            }
        }
        PromptSelectionReport::Candidate row;
        row.id = tmpl.id;
        row.body = tmpl.body;
        row.repaired = tmpl.repaired;
        row.correct = correct;
        row.total = subset.size();
        row.accuracy = static_cast<double>(correct) /
                       static_cast<double>(subset.size());
        report.candidates.push_back(std::move(row));
        if (report.candidates[ci].accuracy > report.candidates[best].accuracy) {
            best = ci;
        }
    }
    report.selected_index = best;
    return {candidates[best], report};
}

}  // namespace chatagri
