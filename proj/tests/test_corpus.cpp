#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "chatagri/corpus.hpp"
#include "chatagri/error.hpp"

using namespace chatagri;
namespace fs = std::filesystem;

namespace {

const fs::path kData = CHATAGRI_TEST_DATA_DIR;

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "chatagri-corpus-tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("schema needs at least two distinct labels") {
    CHECK_THROWS_AS(LabelSchema({"Only"}), ParseError);
    CHECK_THROWS_AS(LabelSchema({"A", "a"}), ParseError);  // same key
    CHECK_THROWS_AS(LabelSchema({"A", "  "}), ParseError);
    CHECK_NOTHROW(LabelSchema({"A", "B"}));
}

TEST_CASE("index_of accepts display names and keys") {
    const LabelSchema s({"Bioagressor", "Disease", "Others"});
    CHECK(s.index_of("Disease") == size_t{1});
    CHECK(s.index_of("disease") == size_t{1});
    CHECK(s.index_of("  DISEASE ") == size_t{1});
    CHECK_FALSE(s.index_of("Weeds").has_value());
}

TEST_CASE("pivot answers start with display name and key") {
    const LabelSchema s({"Natural Hazard", "other"}, {}, {{"other", "misc"}});
    const auto& hazard = s.pivot_answers(0);
    REQUIRE(hazard.size() == 2);
    CHECK(hazard[0] == "Natural Hazard");
    CHECK(hazard[1] == "natural hazard");
    // "other" already is its own key, so no separate key entry.
    const auto& other = s.pivot_answers(1);
    REQUIRE(other.size() == 2);
    CHECK(other[0] == "other");
    CHECK(other[1] == "misc");
}

TEST_CASE("unknown label in pivots is rejected") {
    CHECK_THROWS_AS(LabelSchema({"A", "B"}, {{"C", "pivot"}}), ParseError);
    CHECK_THROWS_AS(LabelSchema({"A", "B"}, {}, {{"C", "alias"}}),
                    ParseError);
}

TEST_CASE("schema file loads labels, pivots and answers") {
    const LabelSchema s = LabelSchema::load(kData / "schema_hazards.json");
    REQUIRE(s.size() == 5);
    CHECK(s.label(0) == "Hurricane");
    CHECK(s.has_all_pivots());
    const auto& floods = s.pivot_answers(*s.index_of("Floods"));
    CHECK(std::count(floods.begin(), floods.end(), "flooding") == 1);
}

TEST_CASE("subset keeps pivots and answers of the chosen labels") {
    const LabelSchema s = LabelSchema::load(kData / "schema_hazards.json");
    const LabelSchema sub = s.subset({"Tornado", "Floods"});
    REQUIRE(sub.size() == 2);
    CHECK(sub.label(0) == "Tornado");
    CHECK(sub.pivot(0).has_value());
    const auto& tornado = sub.pivot_answers(0);
    CHECK(std::count(tornado.begin(), tornado.end(), "twister") == 1);
    CHECK_THROWS_AS(s.subset({"Tornado"}), ParseError);
    CHECK_THROWS_AS(s.subset({"Tornado", "Nope"}), ParseError);
}

TEST_CASE("csv loader round-trips quoting, newlines and accents") {
    const auto examples = load_dataset(kData / "pestobserver_test.csv",
                                       DatasetFormat::csv,
                                       LabelSchema::load(kData / "schema_pest.json"));
    REQUIRE(examples.size() == 80);
    CHECK(examples[0].id == "p001");
    CHECK(examples[0].language == "fr");
    CHECK(examples[0].gold_label == "Bioagressor");

    size_t embedded_newlines = 0, quotes = 0;
    for (const auto& e : examples) {
        if (e.text.find('\n') != std::string::npos) ++embedded_newlines;
        if (e.text.find('"') != std::string::npos) ++quotes;
    }
    CHECK(embedded_newlines == 1);
    CHECK(quotes == 1);

    std::set<std::string> ids;
    for (const auto& e : examples) ids.insert(e.id);
    CHECK(ids.size() == examples.size());
}

TEST_CASE("csv header and shape problems are parse errors") {
    const LabelSchema s({"A", "B"});
    const auto path = temp_file("bad.csv");

    write_file(path, "text,id,label\nx,1,A\n");
    CHECK_THROWS_AS(load_dataset(path, DatasetFormat::csv, s), ParseError);

    write_file(path, "id,text,label\n");
    CHECK_THROWS_AS(load_dataset(path, DatasetFormat::csv, s), ParseError);

    write_file(path, "id,text,label\n1,\"unterminated,A\n");
    CHECK_THROWS_AS(load_dataset(path, DatasetFormat::csv, s), ParseError);

    write_file(path, "id,text,label\n1,x,NotALabel\n");
    CHECK_THROWS_AS(load_dataset(path, DatasetFormat::csv, s), ParseError);

    write_file(path, "id,text,label\n1,,A\n");
    CHECK_THROWS_AS(load_dataset(path, DatasetFormat::csv, s), ParseError);
}

TEST_CASE("jsonl loader accepts optional label and lang") {
    const LabelSchema s({"A", "B"});
    const auto path = temp_file("rows.jsonl");
    write_file(path,
               "{\"id\":\"1\",\"text\":\"first\",\"label\":\"A\"}\n"
               "{\"id\":\"2\",\"text\":\"second\",\"label\":null}\n"
               "{\"id\":\"3\",\"text\":\"third\",\"lang\":\"en\"}\n");
    const auto examples = load_dataset(path, DatasetFormat::jsonl, s);
    REQUIRE(examples.size() == 3);
    CHECK(examples[0].gold_label == "A");
    CHECK_FALSE(examples[1].gold_label.has_value());
    CHECK(examples[2].language == "en");

    write_file(path, "{\"id\":\"1\"}\n");
    CHECK_THROWS_AS(load_dataset(path, DatasetFormat::jsonl, s), ParseError);
}

TEST_CASE("save_dataset round-trips both formats") {
    const LabelSchema s = LabelSchema::load(kData / "schema_pest.json");
    const auto examples = load_dataset(kData / "pestobserver_test.csv",
                                       DatasetFormat::csv, s);

    const auto csv_path = temp_file("roundtrip.csv");
    save_dataset(csv_path, DatasetFormat::csv, examples);
    CHECK(load_dataset(csv_path, DatasetFormat::csv, s) == examples);

    const auto jsonl_path = temp_file("roundtrip.jsonl");
    save_dataset(jsonl_path, DatasetFormat::jsonl, examples);
    CHECK(load_dataset(jsonl_path, DatasetFormat::jsonl, s) == examples);
}

TEST_CASE("sample_subset is deterministic and seed-sensitive") {
    const LabelSchema s = LabelSchema::load(kData / "schema_hazards.json");
    const auto examples = load_dataset(kData / "hazards_100.csv",
                                       DatasetFormat::csv, s);

    const auto a = sample_subset(examples, 10, 42);
    const auto b = sample_subset(examples, 10, 42);
    const auto c = sample_subset(examples, 10, 43);
    REQUIRE(a.size() == 10);
    CHECK(a == b);
    CHECK(a != c);

    // Distinct examples, all drawn from the source list.
    std::set<std::string> ids;
    for (const auto& e : a) {
        ids.insert(e.id);
        CHECK(std::find(examples.begin(), examples.end(), e) != examples.end());
    }
    CHECK(ids.size() == a.size());
}

TEST_CASE("sample_subset larger than the list returns a permutation") {
    const LabelSchema s({"A", "B"});
    std::vector<LabeledExample> small;
    for (int i = 0; i < 5; ++i)
        small.push_back({std::to_string(i), "t" + std::to_string(i), "", "A"});
    const auto out = sample_subset(small, 50, 1);
    REQUIRE(out.size() == 5);
    auto sorted = out;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& x, const auto& y) { return x.id < y.id; });
    CHECK(sorted == small);
}

TEST_CASE("dataset format names parse both ways") {
    CHECK(parse_dataset_format("csv") == DatasetFormat::csv);
    CHECK(parse_dataset_format("jsonl") == DatasetFormat::jsonl);
    CHECK(to_string(DatasetFormat::csv) == "csv");
    CHECK_THROWS_AS(parse_dataset_format("tsv"), ParseError);
}

}  // TEST_SUITE
