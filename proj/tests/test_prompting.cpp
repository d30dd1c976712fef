#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "chatagri/corpus.hpp"
#include "chatagri/error.hpp"
#include "chatagri/prompting.hpp"

using namespace chatagri;
namespace fs = std::filesystem;

namespace {

const fs::path kData = CHATAGRI_TEST_DATA_DIR;

LabelSchema pest_schema() {
    return LabelSchema({"Bioagressor", "Disease", "Others"});
}

}  // namespace

TEST_SUITE("prompting") {

TEST_CASE("strategy names parse both ways") {
    for (const char* name : {"manual", "model_triggered", "similarity_direct",
                             "similarity_progressive", "chain_of_thought"}) {
        CHECK(to_string(parse_strategy(name)) == name);
    }
    CHECK_THROWS_AS(parse_strategy("zero_shot"), ParseError);
    CHECK(is_similarity(Strategy::similarity_direct));
    CHECK(is_similarity(Strategy::similarity_progressive));
    CHECK_FALSE(is_similarity(Strategy::manual));
}

TEST_CASE("single-sentence bodies need both slots exactly once") {
    PromptTemplate t{"t", Strategy::manual, "Classify [SENT] as [CATE]",
                     false, false};
    CHECK_NOTHROW(validate_template(t));

    t.body = "Classify [SENT]";
    CHECK_THROWS_AS(validate_template(t), ParseError);
    t.body = "Classify [SENT] [SENT] as [CATE]";
    CHECK_THROWS_AS(validate_template(t), ParseError);
    t.body = "Classify [SENT0] as [CATE]";
    CHECK_THROWS_AS(validate_template(t), ParseError);
}

TEST_CASE("similarity bodies need the target plus contiguous pivots") {
    PromptTemplate t{"t", Strategy::similarity_direct,
                     "S: [SENT0] A: [SENT1] B: [SENT2]", false, false};
    CHECK_NOTHROW(validate_template(t));
    CHECK(pivot_slot_count(t) == 2);

    t.body = "S: [SENT0] A: [SENT1]";  // only one pivot
    CHECK_THROWS_AS(validate_template(t), ParseError);
    t.body = "S: [SENT0] A: [SENT1] C: [SENT3]";  // gap
    CHECK_THROWS_AS(validate_template(t), ParseError);
    t.body = "S: [SENT] A: [SENT1] B: [SENT2]";  // bare slot
    CHECK_THROWS_AS(validate_template(t), ParseError);
}

TEST_CASE("builtin templates all validate and resolve by id") {
    const auto all = builtin_templates();
    CHECK(all.size() >= 4);
    for (const auto& t : all) {
        CHECK_NOTHROW(validate_template(t));
        const auto found = find_builtin(t.id);
        REQUIRE(found.has_value());
        CHECK(found->body == t.body);
    }
    CHECK_FALSE(find_builtin("no-such-id").has_value());
}

TEST_CASE("join_alternatives uses or with an oxford comma") {
    CHECK(join_alternatives({"A"}) == "A");
    CHECK(join_alternatives({"A", "B"}) == "A or B");
    CHECK(join_alternatives({"A", "B", "C"}) == "A, B, or C");
    CHECK(join_alternatives({"A", "B", "C", "D"}) == "A, B, C, or D");
}

TEST_CASE("render_prompt substitutes both slots verbatim") {
    const auto tmpl = *find_builtin("manual-1");
    const auto r = render_prompt(tmpl, "Aphids attacked the wheat",
                                 pest_schema(), "x1");
    CHECK(r.text ==
          "Classify the following sentence into one of the given categories: "
          "Bioagressor, Disease, or Others\n"
          "Sentence: Aphids attacked the wheat\n"
          "Category:");
    CHECK(r.template_id == "manual-1");
    CHECK(r.example_id == "x1");
    CHECK(r.text.find("[SENT]") == std::string::npos);
    CHECK(r.text.find("[CATE]") == std::string::npos);
}

TEST_CASE("suppression appends its sentence at the end") {
    auto tmpl = *find_builtin("manual-1");
    tmpl.suppress_explanation = true;
    const auto r = render_prompt(tmpl, "text", pest_schema());
    const std::string tail = "\nPlease only answer the category.";
    REQUIRE(r.text.size() > tail.size());
    CHECK(r.text.substr(r.text.size() - tail.size()) == tail);
}

TEST_CASE("chain_of_thought appends the reasoning clause instead") {
    auto tmpl = *find_builtin("manual-1");
    tmpl.strategy = Strategy::chain_of_thought;
    tmpl.suppress_explanation = true;  // ignored under chain_of_thought
    const auto r = render_prompt(tmpl, "text", pest_schema());
    CHECK(r.text.find(chain_of_thought_clause) != std::string::npos);
    CHECK(r.text.find(answer_suppressor) == std::string::npos);
}

TEST_CASE("a sentence containing slot-like text is inserted untouched") {
    const auto tmpl = *find_builtin("manual-1");
    const auto r =
        render_prompt(tmpl, "weird [CATE] marker", pest_schema());
    CHECK(r.text.find("weird [CATE] marker") != std::string::npos);
}

TEST_CASE("render_similarity_direct letters the pivots in order") {
    const auto r = render_similarity_direct(
        "target s", {{"A", "first pivot"}, {"B", "second pivot"}});
    CHECK(r.text ==
          "Given sentence S: target s, which sentence of A: first pivot, "
          "B: second pivot do you think is most similar to sentence S? "
          "A or B?");
    CHECK_THROWS_AS(render_similarity_direct("t", {{"A", "only"}}), Error);
    CHECK_THROWS_AS(
        render_similarity_direct("t", {{"B", "x"}, {"A", "y"}}), Error);
    CHECK_THROWS_AS(
        render_similarity_direct("t", {{"A", "x"}, {"B", "  "}}), Error);
}

TEST_CASE("render_similarity_pair ends with the letter constraint") {
    const auto r = render_similarity_pair("s", "pa", "pb", "x1", 3);
    const std::string tail = "\nPlease answer using only A and B.";
    CHECK(r.text.substr(r.text.size() - tail.size()) == tail);
    CHECK(r.turn_index == 3);
    CHECK_THROWS_AS(render_similarity_pair("s", "same", "same"), Error);
}

TEST_CASE("render_similarity_template fills indexed slots") {
    PromptTemplate t{"custom", Strategy::similarity_direct,
                     "Compare [SENT0] against [SENT1] and [SENT2].", false,
                     false};
    const auto r = render_similarity_template(t, "s", {"p1", "p2"});
    CHECK(r.text == "Compare s against p1 and p2.");
    CHECK_THROWS_AS(render_similarity_template(t, "s", {"p1"}), Error);
}

TEST_CASE("template json round-trips and defaults suppression by strategy") {
    const auto t = *find_builtin("triggered-selected");
    const auto back = template_from_json(to_json(t));
    CHECK(back.id == t.id);
    CHECK(back.strategy == t.strategy);
    CHECK(back.body == t.body);
    CHECK(back.suppress_explanation == t.suppress_explanation);

    // Without the field, single-sentence strategies default to suppression.
    const auto manual = template_from_json(
        {{"id", "m"}, {"strategy", "manual"}, {"body", "[SENT] [CATE]"}});
    CHECK(manual.suppress_explanation);
    const auto sim = template_from_json(
        {{"id", "s"},
         {"strategy", "similarity_direct"},
         {"body", "[SENT0] [SENT1] [SENT2]"}});
    CHECK_FALSE(sim.suppress_explanation);
}

TEST_CASE("template files save and load") {
    const auto dir = fs::temp_directory_path() / "chatagri-prompting-tests";
    fs::create_directories(dir);
    const auto path = dir / "template.json";
    const auto t = *find_builtin("manual-selected");
    save_template(path, t);
    const auto back = load_template(path);
    CHECK(back.id == t.id);
    CHECK(back.body == t.body);
    CHECK(back.suppress_explanation == t.suppress_explanation);
}

TEST_CASE("trigger meta prompt spells small counts out") {
    CHECK(trigger_meta_prompt("text classification", 5) ==
          "Provide five concise prompts or templates that can make you deal "
          "with the text classification task.");
    CHECK(trigger_meta_prompt("tagging", 3).find("three") !=
          std::string::npos);
    CHECK(trigger_meta_prompt("tagging", 42).find("42") != std::string::npos);
}

TEST_CASE("trigger_prompts parses lists and repairs missing slots") {
    MockBackend mock(
        {},
        std::string("1. Classify [SENT] into one of [CATE]\n"
                    "2) \"Label [SENT] using [CATE]\"\n"
                    "- Decide the category among [CATE]\n"
                    "* Read [SENT] and answer\n"
                    "not a list item, ignored\n"));
    const auto templates = trigger_prompts(mock, "agri text classification");
    REQUIRE(templates.size() == 4);
    CHECK(templates[0].body == "Classify [SENT] into one of [CATE]");
    CHECK(templates[0].strategy == Strategy::model_triggered);
    CHECK_FALSE(templates[0].repaired);
    CHECK(templates[1].body == "Label [SENT] using [CATE]");

    // Items missing a slot come back repaired, with the slot appended.
    CHECK(templates[2].repaired);
    CHECK(templates[2].body.find("[SENT]") != std::string::npos);
    CHECK(templates[3].repaired);
    CHECK(templates[3].body.find("[CATE]") != std::string::npos);
    for (const auto& t : templates) CHECK_NOTHROW(validate_template(t));
}

TEST_CASE("trigger_prompts caps the list at k") {
    MockBackend mock({}, std::string("1. A [SENT] [CATE]\n2. B [SENT] [CATE]\n"
                                     "3. C [SENT] [CATE]"));
    CHECK(trigger_prompts(mock, "t", 2).size() == 2);
}

TEST_CASE("trigger_prompts without any list item is an error") {
    MockBackend mock({}, std::string("I would simply classify the text."));
    CHECK_THROWS_AS(trigger_prompts(mock, "t"), ParseError);
}

TEST_CASE("select_best_prompt scores candidates on a shared sample") {
    const LabelSchema schema = LabelSchema::load(kData / "schema_hazards.json");
    const auto examples = load_dataset(kData / "hazards_100.csv",
                                       DatasetFormat::csv, schema);
    const auto candidates = std::vector<PromptTemplate>{
        *find_builtin("manual-1"), *find_builtin("manual-2")};
    const auto mock = load_mock_script(kData / "mock_select.json");

    const auto [best, report] = select_best_prompt(
        candidates, examples, schema, default_rules(), *mock, {}, 100, 0);
    CHECK(best.id == "manual-1");
    CHECK(report.selected_index == 0);
    CHECK(report.sample_size == 100);
    REQUIRE(report.candidates.size() == 2);
    CHECK(report.candidates[0].correct == 90);
    CHECK(report.candidates[1].correct == 60);
    CHECK(report.candidates[0].accuracy == doctest::Approx(0.9));

    // Same seed, same sample, same report.
    const auto [best2, report2] = select_best_prompt(
        candidates, examples, schema, default_rules(), *mock, {}, 100, 0);
    CHECK(best2.id == best.id);
    CHECK(to_json(report2).dump() == to_json(report).dump());
}

TEST_CASE("select_best_prompt breaks ties toward the earlier candidate") {
    const LabelSchema schema = LabelSchema::load(kData / "schema_hazards.json");
    const auto examples = load_dataset(kData / "hazards_100.csv",
                                       DatasetFormat::csv, schema);
    auto copy = *find_builtin("manual-1");
    copy.id = "manual-1-copy";
    const auto candidates =
        std::vector<PromptTemplate>{*find_builtin("manual-1"), copy};
    const auto mock = load_mock_script(kData / "mock_select.json");
    const auto [best, report] = select_best_prompt(
        candidates, examples, schema, default_rules(), *mock, {}, 100, 0);
    CHECK(best.id == "manual-1");
    CHECK(report.candidates[0].correct == report.candidates[1].correct);
}

TEST_CASE("select_best_prompt needs gold labels throughout") {
    const LabelSchema schema = LabelSchema::load(kData / "schema_hazards.json");
    auto examples = load_dataset(kData / "hazards_100.csv",
                                 DatasetFormat::csv, schema);
    examples[5].gold_label.reset();
    const auto candidates =
        std::vector<PromptTemplate>{*find_builtin("manual-1")};
    const auto mock = load_mock_script(kData / "mock_select.json");
    CHECK_THROWS_AS(select_best_prompt(candidates, examples, schema,
                                       default_rules(), *mock, {}, 100, 0),
                    Error);
}

}  // TEST_SUITE
