#include "chatagri/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "chatagri/error.hpp"
#include "chatagri/text.hpp"

namespace chatagri {

using nlohmann::json;

LabelSchema::LabelSchema(
    std::vector<std::string> labels,
    std::vector<std::pair<std::string, std::string>> pivots,
    std::vector<std::pair<std::string, std::string>> extra_answers)
    : labels_(std::move(labels)) {
    if (labels_.size() < 2) {
        throw ParseError("label schema needs at least 2 labels, got " +
                         std::to_string(labels_.size()));
    }
    std::unordered_map<std::string, size_t> by_key;
    for (size_t i = 0; i < labels_.size(); ++i) {
        std::string key = text::normalize_label(labels_[i]);
        if (key.empty()) {
            throw ParseError("label '" + labels_[i] + "' normalizes to empty");
        }
        if (!by_key.emplace(key, i).second) {
            throw ParseError("labels '" + labels_[by_key[key]] + "' and '" +
                             labels_[i] + "' share the normalized key '" + key +
                             "'");
        }
        keys_.push_back(std::move(key));
    }
    pivots_.resize(labels_.size());
    pivot_answers_.resize(labels_.size());
    for (size_t i = 0; i < labels_.size(); ++i) {
        pivot_answers_[i].push_back(labels_[i]);
        if (keys_[i] != labels_[i]) {
            pivot_answers_[i].push_back(keys_[i]);
        }
    }
    const auto find = [&](const std::string& name) -> size_t {
        auto idx = index_of(name);
        if (!idx) {
            throw ParseError("unknown label '" + name + "' in schema extras");
        }
        return *idx;
    };
    for (auto& [name, sentence] : pivots) {
        pivots_[find(name)] = std::move(sentence);
    }
    for (auto& [name, answer] : extra_answers) {
        auto& list = pivot_answers_[find(name)];
        if (std::find(list.begin(), list.end(), answer) == list.end()) {
            list.push_back(std::move(answer));
        }
    }
}

LabelSchema LabelSchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open schema file: " + path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("schema file " + path.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("labels") ||
        !doc["labels"].is_array()) {
        throw ParseError("schema file " + path.string() +
                         ": expected an object with a \"labels\" array");
    }
    std::vector<std::string> labels;
    for (const auto& l : doc["labels"]) {
        labels.push_back(l.get<std::string>());
    }
    std::vector<std::pair<std::string, std::string>> pivots;
    if (doc.contains("pivots")) {
        for (auto& [name, sentence] : doc["pivots"].items()) {
            pivots.emplace_back(name, sentence.get<std::string>());
        }
    }
    std::vector<std::pair<std::string, std::string>> extras;
    if (doc.contains("pivot_answers")) {
        for (auto& [name, list] : doc["pivot_answers"].items()) {
            for (const auto& a : list) {
                extras.emplace_back(name, a.get<std::string>());
            }
        }
    }
    return LabelSchema(std::move(labels), std::move(pivots), std::move(extras));
}

std::optional<size_t> LabelSchema::index_of(std::string_view name_or_key) const {
    const std::string key = text::normalize_label(name_or_key);
    for (size_t i = 0; i < keys_.size(); ++i) {
        if (keys_[i] == key) {
            return i;
        }
    }
    return std::nullopt;
}

bool LabelSchema::has_all_pivots() const {
    return std::all_of(pivots_.begin(), pivots_.end(),
                       [](const auto& p) { return p.has_value(); });
}

LabelSchema LabelSchema::subset(const std::vector<std::string>& labels) const {
    std::vector<std::pair<std::string, std::string>> pivots;
    std::vector<std::pair<std::string, std::string>> extras;
    std::vector<std::string> names;
    for (const auto& name : labels) {
        auto idx = index_of(name);
        if (!idx) {
            throw ParseError("subset label '" + name + "' not in schema");
        }
        names.push_back(labels_[*idx]);
        if (pivots_[*idx]) {
            pivots.emplace_back(labels_[*idx], *pivots_[*idx]);
        }
        for (const auto& a : pivot_answers_[*idx]) {
            extras.emplace_back(labels_[*idx], a);
        }
    }
    return LabelSchema(std::move(names), std::move(pivots), std::move(extras));
}

DatasetFormat parse_dataset_format(std::string_view name) {
    if (name == "csv") {
        return DatasetFormat::csv;
    }
    if (name == "jsonl") {
        return DatasetFormat::jsonl;
    }
    throw ParseError("unknown dataset format '" + std::string(name) +
                     "' (expected csv or jsonl)");
}

std::string to_string(DatasetFormat f) {
    return f == DatasetFormat::csv ? "csv" : "jsonl";
}

namespace {

struct CsvRecord {
    std::vector<std::string> fields;
    size_t line;  // 1-based line the record starts on
};

// RFC-4180 reader: quoted fields may contain commas, doubled quotes and
// newlines. Records are split on unquoted LF; a trailing CR is dropped.
std::vector<CsvRecord> read_csv(std::istream& in, const std::string& name) {
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    std::vector<CsvRecord> records;
    size_t line = 1;
    size_t i = 0;
    while (i < data.size()) {
        CsvRecord rec;
        rec.line = line;
        std::string field;
        bool quoted = false;
        bool any = false;
        for (;; ++i) {
            if (i >= data.size()) {
                if (quoted) {
                    throw ParseError(name + ":" + std::to_string(rec.line) +
                                     ": unterminated quoted field");
                }
                break;
            }
            const char c = data[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < data.size() && data[i + 1] == '"') {
                        field.push_back('"');
                        ++i;
                    } else {
                        quoted = false;
                    }
                } else {
                    if (c == '\n') {
                        ++line;
                    }
                    field.push_back(c);
                }
                continue;
            }
            if (c == '"' && field.empty() && !any) {
                quoted = true;
                any = true;
                continue;
            }
            if (c == ',') {
                rec.fields.push_back(std::move(field));
                field.clear();
                any = false;
                continue;
            }
            if (c == '\n') {
                ++line;
                ++i;
                break;
            }
            if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') {
                line++;
                i += 2;
                break;
            }
            field.push_back(c);
            any = true;
        }
        rec.fields.push_back(std::move(field));
        // Skip blank lines between records.
        if (!(rec.fields.size() == 1 && rec.fields[0].empty())) {
            records.push_back(std::move(rec));
        }
    }
    return records;
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

LabeledExample make_example(std::string id, std::string text_value,
                            std::string label, std::string lang,
                            const LabelSchema& schema, const std::string& where) {
    LabeledExample ex;
    ex.id = std::move(id);
    ex.text = std::move(text_value);
    ex.language = std::move(lang);
    if (text::trim_copy(ex.text).empty()) {
        throw ParseError(where + ": empty text");
    }
    if (!label.empty()) {
        if (!schema.contains(label)) {
            throw ParseError(where + ": label '" + label +
                             "' is not in the schema");
        }
        ex.gold_label = std::move(label);
    }
    return ex;
}

std::vector<LabeledExample> load_csv(const std::filesystem::path& path,
                                     const LabelSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open dataset file: " + path.string());
    }
    const std::string name = path.string();
    auto records = read_csv(in, name);
    if (records.empty()) {
        throw ParseError(name + ": empty file");
    }
    const auto& header = records.front().fields;
    const bool has_lang = header.size() == 4 && header[3] == "lang";
    if (!((header.size() == 3 || has_lang) && header[0] == "id" &&
          header[1] == "text" && header[2] == "label")) {
        throw ParseError(name + ":1: expected header id,text,label[,lang]");
    }
    if (records.size() == 1) {
        throw ParseError(name + ": no data rows");
    }
    std::vector<LabeledExample> out;
    out.reserve(records.size() - 1);
    for (size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::string where = name + ":" + std::to_string(rec.line);
        if (rec.fields.size() != header.size()) {
            throw ParseError(where + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(rec.fields.size()));
        }
        out.push_back(make_example(rec.fields[0], rec.fields[1], rec.fields[2],
                                   has_lang ? rec.fields[3] : "", schema,
                                   where));
    }
    return out;
}

std::vector<LabeledExample> load_jsonl(const std::filesystem::path& path,
                                       const LabelSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open dataset file: " + path.string());
    }
    const std::string name = path.string();
    std::vector<LabeledExample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim_copy(line).empty()) {
            continue;
        }
        const std::string where = name + ":" + std::to_string(lineno);
        json row;
        try {
            row = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(where + ": " + e.what());
        }
        if (!row.is_object() || !row.contains("id") || !row.contains("text")) {
            throw ParseError(where + ": expected an object with id and text");
        }
        std::string label;
        if (row.contains("label") && !row["label"].is_null()) {
            label = row["label"].get<std::string>();
        }
        std::string lang;
        if (row.contains("lang") && !row["lang"].is_null()) {
            lang = row["lang"].get<std::string>();
        }
        out.push_back(make_example(row["id"].get<std::string>(),
                                   row["text"].get<std::string>(),
                                   std::move(label), std::move(lang), schema,
                                   where));
    }
    if (out.empty()) {
        throw ParseError(name + ": empty file");
    }
    return out;
}

}  // namespace

std::vector<LabeledExample> load_dataset(const std::filesystem::path& path,
                                         DatasetFormat format,
                                         const LabelSchema& schema) {
    return format == DatasetFormat::csv ? load_csv(path, schema)
                                        : load_jsonl(path, schema);
}

void save_dataset(const std::filesystem::path& path, DatasetFormat format,
                  const std::vector<LabeledExample>& examples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ParseError("cannot write dataset file: " + path.string());
    }
    if (format == DatasetFormat::csv) {
        const bool has_lang =
            std::any_of(examples.begin(), examples.end(),
                        [](const auto& e) { return !e.language.empty(); });
        out << (has_lang ? "id,text,label,lang\n" : "id,text,label\n");
        for (const auto& e : examples) {
            out << csv_quote(e.id) << ',' << csv_quote(e.text) << ','
                << csv_quote(e.gold_label.value_or(""));
            if (has_lang) {
                out << ',' << csv_quote(e.language);
            }
            out << '\n';
        }
    } else {
        for (const auto& e : examples) {
            json row;
            row["id"] = e.id;
            row["text"] = e.text;
            if (e.gold_label) {
                row["label"] = *e.gold_label;
            }
            if (!e.language.empty()) {
                row["lang"] = e.language;
            }
            out << row.dump() << '\n';
        }
    }
}

namespace {

// splitmix64; fixed algorithm so selections are identical on every platform.
struct SplitMix64 {
    uint64_t state;
    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    // Unbiased draw from [0, bound) via rejection.
    uint64_t bounded(uint64_t bound) {
        const uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const uint64_t r = next();
            if (r >= threshold) {
                return r % bound;
            }
        }
    }
};

}  // namespace

std::vector<LabeledExample> sample_subset(
    const std::vector<LabeledExample>& examples, size_t n, uint64_t seed) {
    if (examples.empty()) {
        throw Error("sample_subset: empty example list");
    }
    if (n == 0) {
        throw Error("sample_subset: n must be >= 1");
    }
    std::vector<LabeledExample> pool = examples;
    SplitMix64 rng{seed};
    for (size_t i = pool.size() - 1; i > 0; --i) {
        const size_t j = static_cast<size_t>(rng.bounded(i + 1));
        std::swap(pool[i], pool[j]);
    }
    if (n < pool.size()) {
        pool.resize(n);
    }
    return pool;
}

}  // namespace chatagri
