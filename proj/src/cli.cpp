#include "chatagri/cli.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>
#include <system_error>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "chatagri/alignment.hpp"
#include "chatagri/error.hpp"
#include "chatagri/evaluation.hpp"
#include "chatagri/text.hpp"

namespace chatagri {

using nlohmann::json;

namespace {

uint64_t parse_u64(std::string_view name, std::string_view value) {
    try {
        size_t pos = 0;
        const uint64_t parsed = std::stoull(std::string(value), &pos);
        if (pos != value.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError({std::string(name) + ": expected an integer, got '" +
                           std::string(value) + "'"});
    }
}

double parse_real(std::string_view name, std::string_view value) {
    try {
        size_t pos = 0;
        const double parsed = std::stod(std::string(value), &pos);
        if (pos != value.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError({std::string(name) + ": expected a number, got '" +
                           std::string(value) + "'"});
    }
}

RateLimitConfig parse_rate_limit(std::string_view value) {
    const size_t slash = value.find('/');
    if (slash == std::string_view::npos) {
        throw ConfigError(
            {"rate_limit: expected REQUESTS/SECONDS, e.g. 25/10800"});
    }
    RateLimitConfig limit;
    limit.requests = parse_u64("rate_limit", value.substr(0, slash));
    limit.interval_s = parse_real("rate_limit", value.substr(slash + 1));
    return limit;
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError({"cannot open config file: " + path.string()});
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError({"config file " + path.string() + ": " + e.what()});
    }
    if (!doc.is_object()) {
        throw ConfigError(
            {"config file " + path.string() + ": expected a JSON object"});
    }
    RunConfig config;
    std::vector<std::string> problems;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "dataset") {
                config.dataset = value.get<std::string>();
            } else if (key == "format") {
                config.format =
                    parse_dataset_format(value.get<std::string>());
            } else if (key == "schema") {
                config.schema = value.get<std::string>();
            } else if (key == "strategy") {
                config.strategy = parse_strategy(value.get<std::string>());
            } else if (key == "template") {
                config.template_ref = value.get<std::string>();
            } else if (key == "backend") {
                config.backend = value.get<std::string>();
            } else if (key == "model") {
                config.model = value.get<std::string>();
            } else if (key == "cache") {
                config.cache = value.get<std::string>();
            } else if (key == "rules") {
                config.rules = value.get<std::string>();
            } else if (key == "seed") {
                config.seed = value.get<uint64_t>();
            } else if (key == "workers") {
                config.workers = value.get<size_t>();
            } else if (key == "rate_limit") {
                config.rate_limit.requests =
                    value.at("requests").get<size_t>();
                config.rate_limit.interval_s =
                    value.at("interval_s").get<double>();
            } else if (key == "output_dir") {
                config.output_dir = value.get<std::string>();
            } else if (key == "sample_n") {
                config.sample_n = value.get<size_t>();
            } else if (key == "mock_script") {
                config.mock_script = value.get<std::string>();
            } else if (key == "temperature") {
                config.temperature = value.get<double>();
            } else if (key == "max_output_tokens") {
                config.max_output_tokens = value.get<int>();
            } else if (key == "system_message") {
                config.system_message = value.get<std::string>();
            } else if (key == "resume_from") {
                config.resume_from = value.get<std::string>();
            } else {
                problems.push_back("unknown config field '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        problems.push_back(std::string{"config value: "} + e.what());
    } catch (const ParseError& e) {
        problems.push_back(e.what());
    }
    if (!problems.empty()) {
        throw ConfigError(problems);
    }
    return config;
}

void apply_override(RunConfig& config, std::string_view name,
                    std::string_view value) {
    std::string key(name);
    std::replace(key.begin(), key.end(), '-', '_');
    try {
        if (key == "dataset") {
            config.dataset = std::string(value);
        } else if (key == "format") {
            config.format = parse_dataset_format(value);
        } else if (key == "schema") {
            config.schema = std::string(value);
        } else if (key == "strategy") {
            config.strategy = parse_strategy(value);
        } else if (key == "template") {
            config.template_ref = std::string(value);
        } else if (key == "backend") {
            config.backend = std::string(value);
        } else if (key == "model") {
            config.model = std::string(value);
        } else if (key == "cache") {
            config.cache = std::string(value);
        } else if (key == "rules") {
            config.rules = std::string(value);
        } else if (key == "seed") {
            config.seed = parse_u64(key, value);
        } else if (key == "workers") {
            config.workers = static_cast<size_t>(parse_u64(key, value));
        } else if (key == "rate_limit") {
            config.rate_limit = parse_rate_limit(value);
        } else if (key == "output_dir") {
            config.output_dir = std::string(value);
        } else if (key == "sample_n") {
            config.sample_n = static_cast<size_t>(parse_u64(key, value));
        } else if (key == "mock_script") {
            config.mock_script = std::string(value);
        } else if (key == "temperature") {
            config.temperature = parse_real(key, value);
        } else if (key == "max_output_tokens") {
            config.max_output_tokens =
                static_cast<int>(parse_u64(key, value));
        } else if (key == "system_message") {
            config.system_message = std::string(value);
        } else if (key == "resume_from") {
            config.resume_from = std::string(value);
        } else {
            throw ConfigError({"unknown config field '" + key + "'"});
        }
    } catch (const ParseError& e) {
        throw ConfigError({key + ": " + e.what()});
    }
}

void validate_run_config(const RunConfig& config, CommandKind kind) {
    std::vector<std::string> problems;
    const auto need_file = [&](const std::filesystem::path& path,
                               const std::string& what) {
        if (path.empty()) {
            problems.push_back(what + " is not set");
        } else if (!std::filesystem::exists(path)) {
            problems.push_back(what + " does not exist: " + path.string());
        }
    };

    if (config.backend != "mock" && config.backend != "live" &&
        config.backend != "cache+live" && config.backend != "cache+mock") {
        problems.push_back("backend must be mock, live, cache+live or "
                           "cache+mock; got '" +
                           config.backend + "'");
    }
    if (config.backend == "mock" || config.backend == "cache+mock") {
        need_file(config.mock_script, "mock_script");
    }
    if (config.backend == "cache+live" || config.backend == "cache+mock") {
        if (config.cache.empty()) {
            problems.push_back("cache path is not set");
        }
    }
    if (config.model.empty()) {
        problems.push_back("model id is empty");
    }
    if (config.workers == 0) {
        problems.push_back("workers must be >= 1");
    }
    if (config.temperature < 0.0) {
        problems.push_back("temperature must be >= 0");
    }
    if (config.rate_limit.requests > 0 && config.rate_limit.interval_s <= 0.0) {
        problems.push_back("rate_limit interval must be > 0 seconds");
    }
    if (!config.rules.empty() && !std::filesystem::exists(config.rules)) {
        problems.push_back("rules file does not exist: " +
                           config.rules.string());
    }
    if (config.output_dir.empty()) {
        problems.push_back("output_dir is empty");
    }
    if (config.sample_n && *config.sample_n == 0) {
        problems.push_back("sample_n must be >= 1");
    }

    if (kind != CommandKind::trigger_prompts) {
        need_file(config.dataset, "dataset");
        need_file(config.schema, "schema");
        if (!is_similarity(config.strategy)) {
            if (config.template_ref.empty()) {
                problems.push_back("template is not set");
            } else if (!find_builtin(config.template_ref) &&
                       !std::filesystem::exists(config.template_ref)) {
                problems.push_back(
                    "template '" + config.template_ref +
                    "' is neither a built-in id nor an existing file");
            }
        } else if (!config.template_ref.empty() &&
                   !std::filesystem::exists(config.template_ref)) {
            problems.push_back("template file does not exist: " +
                               config.template_ref);
        }
    }
    if (!config.resume_from.empty() &&
        !std::filesystem::exists(config.resume_from)) {
        problems.push_back("resume_from does not exist: " +
                           config.resume_from.string());
    }
    if (!problems.empty()) {
        throw ConfigError(problems);
    }
}

std::shared_ptr<Backend> build_backend(const RunConfig& config) {
    std::shared_ptr<Backend> backend;
    if (config.backend == "mock") {
        backend = load_mock_script(config.mock_script);
    } else if (config.backend == "live") {
        backend = std::make_shared<HttpBackend>(HttpBackend::options_from_env());
    } else if (config.backend == "cache+live") {
        backend = std::make_shared<CacheBackend>(
            config.cache,
            std::make_shared<HttpBackend>(HttpBackend::options_from_env()));
    } else if (config.backend == "cache+mock") {
        backend = std::make_shared<CacheBackend>(
            config.cache, load_mock_script(config.mock_script));
    } else {
        throw ConfigError({"unknown backend '" + config.backend + "'"});
    }
    if (config.rate_limit.requests > 0) {
        backend = std::make_shared<ThrottledBackend>(
            backend, std::make_shared<RateLimiter>(
                         config.rate_limit.requests,
                         config.rate_limit.interval_s));
    }
    return backend;
}

std::optional<PromptTemplate> resolve_template(const RunConfig& config,
                                               const LabelSchema& schema) {
    if (is_similarity(config.strategy)) {
        if (config.template_ref.empty()) {
            return std::nullopt;  // built-in wording
        }
        PromptTemplate tmpl = load_template(config.template_ref);
        if (tmpl.strategy != config.strategy) {
            throw ConfigError({"template '" + tmpl.id + "' is a " +
                               to_string(tmpl.strategy) +
                               " template but the strategy is " +
                               to_string(config.strategy)});
        }
        const size_t slots = pivot_slot_count(tmpl);
        const size_t wanted =
            config.strategy == Strategy::similarity_direct ? schema.size() : 2;
        if (slots != wanted) {
            throw ConfigError({"template '" + tmpl.id + "' has " +
                               std::to_string(slots) + " pivot slots but " +
                               std::to_string(wanted) + " are needed"});
        }
        return tmpl;
    }

    PromptTemplate tmpl;
    if (std::filesystem::exists(config.template_ref)) {
        tmpl = load_template(config.template_ref);
    } else if (auto builtin = find_builtin(config.template_ref)) {
        tmpl = std::move(*builtin);
    } else {
        throw ConfigError({"template '" + config.template_ref +
                           "' is neither a built-in id nor an existing file"});
    }
    if (is_similarity(tmpl.strategy)) {
        throw ConfigError({"template '" + tmpl.id +
                           "' is a similarity template; strategy " +
                           to_string(config.strategy) +
                           " needs a single-sentence one"});
    }
    if (config.strategy == Strategy::chain_of_thought) {
        // Reuse any single-sentence body; the rendering step appends the
        // reasoning clause.
        tmpl.strategy = Strategy::chain_of_thought;
        return tmpl;
    }
    if (tmpl.strategy != config.strategy) {
        throw ConfigError({"template '" + tmpl.id + "' is a " +
                           to_string(tmpl.strategy) +
                           " template but the strategy is " +
                           to_string(config.strategy)});
    }
    return tmpl;
}

InferenceOptions inference_options(const RunConfig& config) {
    InferenceOptions options;
    options.model = config.model;
    options.temperature = config.temperature;
    options.max_output_tokens = config.max_output_tokens;
    options.system_message = config.system_message;
    return options;
}

namespace {

std::filesystem::path fresh_run_dir(const std::filesystem::path& base) {
    std::filesystem::create_directories(base);
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    for (int i = 1; i <= 10000; ++i) {
        std::filesystem::path dir =
            base / (i == 1 ? std::string{"run-"} + stamp
                           : std::string{"run-"} + stamp + "-" +
                                 std::to_string(i));
        std::error_code ec;
        if (std::filesystem::create_directory(dir, ec) && !ec) {
            return dir;
        }
    }
    throw Error("cannot create a fresh run directory under " + base.string());
}

std::vector<ClassificationOutcome> load_outcomes(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open outcomes file: " + path.string());
    }
    std::vector<ClassificationOutcome> outcomes;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim_copy(line).empty()) {
            continue;
        }
        try {
            outcomes.push_back(outcome_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": " + e.what());
        }
    }
    return outcomes;
}

ClassificationOutcome failure_outcome(const LabeledExample& example,
                                      Strategy strategy,
                                      const std::string& template_id,
                                      std::string reason) {
    ClassificationOutcome outcome;
    outcome.example_id = example.id;
    outcome.gold_label = example.gold_label;
    outcome.strategy = strategy;
    outcome.template_id = template_id;
    outcome.unresolved = true;
    outcome.failure_reason = std::move(reason);
    return outcome;
}

}  // namespace

ClassifyRun cmd_classify(const RunConfig& config, std::ostream& log) {
    validate_run_config(config, CommandKind::classify);
    const LabelSchema schema = LabelSchema::load(config.schema);
    std::vector<LabeledExample> examples =
        load_dataset(config.dataset, config.format, schema);
    const std::vector<AlignmentRule> rules =
        config.rules.empty() ? default_rules() : load_rules(config.rules);
    const std::optional<PromptTemplate> tmpl = resolve_template(config, schema);
    if (is_similarity(config.strategy) && !schema.has_all_pivots()) {
        std::vector<std::string> problems;
        for (size_t i = 0; i < schema.size(); ++i) {
            if (!schema.pivot(i)) {
                problems.push_back("label '" + schema.label(i) +
                                   "' has no pivot sentence");
            }
        }
        throw ConfigError(problems);
    }
    if (config.sample_n) {
        examples = sample_subset(examples, *config.sample_n, config.seed);
    }

    std::unordered_map<std::string, ClassificationOutcome> done;
    if (!config.resume_from.empty()) {
        std::filesystem::path previous = config.resume_from;
        if (std::filesystem::is_directory(previous)) {
            previous /= "outcomes.jsonl";
        }
        for (auto& outcome : load_outcomes(previous)) {
            if (!outcome.unresolved) {
                done.insert_or_assign(outcome.example_id, std::move(outcome));
            }
        }
    }

    const std::shared_ptr<Backend> backend = build_backend(config);
    const InferenceOptions options = inference_options(config);
    const std::string template_id =
        tmpl ? tmpl->id
             : (config.strategy == Strategy::similarity_direct
                    ? "similarity-direct"
                    : "similarity-pair");

    std::vector<std::optional<ClassificationOutcome>> slots(examples.size());
    enum { kOk, kUnresolved, kFailed };
    std::vector<int> kinds(examples.size(), kOk);
    for (size_t i = 0; i < examples.size(); ++i) {
        if (auto it = done.find(examples[i].id); it != done.end()) {
            slots[i] = it->second;
        }
    }

    std::atomic<size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= examples.size()) {
                return;
            }
            if (slots[i]) {
                continue;  // carried over from the resumed run
            }
            const LabeledExample& ex = examples[i];
            try {
                slots[i] = classify_example(ex, config.strategy,
                                            tmpl ? &*tmpl : nullptr, schema,
                                            *backend, rules, options);
            } catch (const UnresolvableAnswerError& e) {
                slots[i] = failure_outcome(ex, config.strategy, template_id,
                                           e.what());
                kinds[i] = kUnresolved;
            } catch (const std::exception& e) {
                slots[i] = failure_outcome(ex, config.strategy, template_id,
                                           std::string{"backend: "} + e.what());
                kinds[i] = kFailed;
            }
        }
    };
    const size_t worker_count =
        std::max<size_t>(1, std::min(config.workers, examples.size()));
    if (worker_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(worker_count);
        for (size_t w = 0; w < worker_count; ++w) {
            threads.emplace_back(worker);
        }
        for (auto& t : threads) {
            t.join();
        }
    }

    const std::filesystem::path run_dir = fresh_run_dir(config.output_dir);
    std::ofstream outcomes_out(run_dir / "outcomes.jsonl", std::ios::binary);
    std::ofstream transcripts_out(run_dir / "transcripts.jsonl",
                                  std::ios::binary);
    if (!outcomes_out || !transcripts_out) {
        throw Error("cannot write into run directory " + run_dir.string());
    }
    ClassifyRun run;
    run.run_dir = run_dir;
    for (size_t i = 0; i < slots.size(); ++i) {
        const ClassificationOutcome& outcome = *slots[i];
        outcomes_out << to_json(outcome).dump() << '\n';
        for (const auto& t : outcome.transcripts) {
            transcripts_out << to_json(t).dump() << '\n';
        }
        (kinds[i] == kOk
             ? run.resolved
             : kinds[i] == kUnresolved ? run.unresolved : run.failed) += 1;
        run.outcomes.push_back(std::move(*slots[i]));
    }
    log << "run " << run_dir.string() << ": " << run.resolved
        << " classified, " << run.unresolved << " unresolved, " << run.failed
        << " failed\n";
    return run;
}

int cmd_evaluate(const std::filesystem::path& outcomes_path,
                 const std::filesystem::path& schema_path,
                 const std::filesystem::path& output_dir, uint64_t seed,
                 std::ostream& log) {
    std::vector<std::string> problems;
    if (!std::filesystem::exists(outcomes_path)) {
        problems.push_back("outcomes file does not exist: " +
                           outcomes_path.string());
    }
    if (!std::filesystem::exists(schema_path)) {
        problems.push_back("schema file does not exist: " +
                           schema_path.string());
    }
    if (!problems.empty()) {
        throw ConfigError(problems);
    }
    const LabelSchema schema = LabelSchema::load(schema_path);
    const std::vector<ClassificationOutcome> outcomes =
        load_outcomes(outcomes_path);
    if (outcomes.empty()) {
        throw Error("outcomes file is empty: " + outcomes_path.string());
    }
    const EvalReport report = build_report(outcomes, schema, seed);

    std::filesystem::path dir =
        output_dir.empty() ? outcomes_path.parent_path() : output_dir;
    if (dir.empty()) {
        dir = ".";
    }
    std::filesystem::create_directories(dir);
    std::ofstream json_out(dir / "report.json", std::ios::binary);
    std::ofstream text_out(dir / "report.txt", std::ios::binary);
    if (!json_out || !text_out) {
        throw Error("cannot write report files into " + dir.string());
    }
    json_out << to_json(report).dump(2) << '\n';
    const std::string text = report_to_text(report);
    text_out << text;
    log << text;
    return report.alignment_stats.unresolved > 0 ? 3 : 0;
}

int cmd_select_prompt(const RunConfig& config,
                      const std::filesystem::path& candidates_path,
                      std::ostream& log) {
    validate_run_config(config, CommandKind::select_prompt);
    if (!std::filesystem::exists(candidates_path)) {
        throw ConfigError(
            {"candidates file does not exist: " + candidates_path.string()});
    }
    std::ifstream in(candidates_path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("candidates file " + candidates_path.string() + ": " +
                         e.what());
    }
    const json& list = doc.is_object() ? doc.at("candidates") : doc;
    if (!list.is_array() || list.empty()) {
        throw Error("candidates file " + candidates_path.string() +
                    " holds no templates");
    }
    std::vector<PromptTemplate> candidates;
    for (const auto& row : list) {
        candidates.push_back(template_from_json(row));
    }

    const LabelSchema schema = LabelSchema::load(config.schema);
    const std::vector<LabeledExample> examples =
        load_dataset(config.dataset, config.format, schema);
    const std::vector<AlignmentRule> rules =
        config.rules.empty() ? default_rules() : load_rules(config.rules);
    const std::shared_ptr<Backend> backend = build_backend(config);

    const auto [selected, report] = select_best_prompt(
        candidates, examples, schema, rules, *backend,
        inference_options(config), config.sample_n.value_or(100), config.seed);

    const std::filesystem::path run_dir = fresh_run_dir(config.output_dir);
    std::ofstream report_out(run_dir / "selection_report.json",
                             std::ios::binary);
    std::ofstream template_out(run_dir / "selected_template.json",
                               std::ios::binary);
    if (!report_out || !template_out) {
        throw Error("cannot write into run directory " + run_dir.string());
    }
    report_out << to_json(report).dump(2) << '\n';
    template_out << to_json(selected).dump(2) << '\n';

    for (const auto& c : report.candidates) {
        log << c.id << ": " << c.correct << "/" << c.total << " correct"
            << (c.repaired ? " (repaired)" : "") << "\n";
    }
    log << "selected: " << selected.id << " -> " << run_dir.string() << "\n";
    return 0;
}

int cmd_trigger_prompts(const RunConfig& config, std::string_view task_name,
                        size_t k, std::ostream& log) {
    validate_run_config(config, CommandKind::trigger_prompts);
    if (k == 0) {
        throw ConfigError({"k must be >= 1"});
    }
    const std::shared_ptr<Backend> backend = build_backend(config);
    const std::vector<PromptTemplate> templates =
        trigger_prompts(*backend, task_name, k, inference_options(config));

    const std::filesystem::path run_dir = fresh_run_dir(config.output_dir);
    json doc = json::array();
    for (const auto& tmpl : templates) {
        doc.push_back(to_json(tmpl));
    }
    std::ofstream out(run_dir / "templates.json", std::ios::binary);
    if (!out) {
        throw Error("cannot write into run directory " + run_dir.string());
    }
    out << doc.dump(2) << '\n';

    for (const auto& tmpl : templates) {
        log << tmpl.id << (tmpl.repaired ? " (repaired): " : ": ")
            << tmpl.body << "\n";
    }
    log << "wrote " << templates.size() << " templates -> "
        << (run_dir / "templates.json").string() << "\n";
    return 0;
}

int cmd_align(std::string_view answer,
              const std::filesystem::path& schema_path,
              const std::filesystem::path& rules_path, std::ostream& log) {
    if (!std::filesystem::exists(schema_path)) {
        throw ConfigError(
            {"schema file does not exist: " + schema_path.string()});
    }
    const LabelSchema schema = LabelSchema::load(schema_path);
    const std::vector<AlignmentRule> rules =
        rules_path.empty() ? default_rules() : load_rules(rules_path);
    const AlignmentResult result = align(answer, rules, schema);
    log << "stage: " << to_string(result.stage) << "\n";
    log << "label: " << result.label << "\n";
    if (result.rule_id) {
        log << "rule: " << *result.rule_id << "\n";
    }
    if (result.stage == AlignmentStage::similarity) {
        log << "distance: " << *result.distance << "\n";
        log << "candidates:\n";
        for (const auto& [label, distance] : result.candidates) {
            log << "  " << label << ": " << distance << "\n";
        }
    }
    return 0;
}

}  // namespace chatagri
