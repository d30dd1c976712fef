#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "chatagri/cli.hpp"
#include "chatagri/error.hpp"

namespace {

// Flag overrides are replayed onto the config in the order given, after the
// config file (if any) is loaded.
struct ConfigArgs {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
};

void add_config_flags(CLI::App* cmd, std::shared_ptr<ConfigArgs> args) {
    cmd->add_option("--config", args->config_path,
                    "JSON config file; flags override its fields");
    static const char* const names[] = {
        "dataset",     "format",        "schema",
        "strategy",    "template",      "backend",
        "model",       "cache",         "rules",
        "seed",        "workers",       "rate-limit",
        "output-dir",  "sample-n",      "mock-script",
        "temperature", "max-output-tokens", "system-message",
        "resume-from",
    };
    for (const char* name : names) {
        cmd->add_option_function<std::string>(
            std::string("--") + name,
            [args, name](const std::string& value) {
                args->overrides.emplace_back(name, value);
            });
    }
}

chatagri::RunConfig assemble(const ConfigArgs& args) {
    chatagri::RunConfig config;
    if (!args.config_path.empty()) {
        config = chatagri::load_run_config(args.config_path);
    }
    for (const auto& [name, value] : args.overrides) {
        chatagri::apply_override(config, name, value);
    }
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot text classification through a chat model"};
    app.require_subcommand(1);
    int exit_code = 0;

    auto classify_args = std::make_shared<ConfigArgs>();
    CLI::App* classify = app.add_subcommand(
        "classify", "classify a dataset and write outcomes + transcripts");
    add_config_flags(classify, classify_args);
    classify->callback([&, classify_args] {
        const auto run =
            chatagri::cmd_classify(assemble(*classify_args), std::cout);
        exit_code = run.resolved > 0 ? 0 : 1;
    });

    std::string outcomes_path;
    std::string eval_schema;
    std::string eval_output;
    uint64_t eval_seed = 0;
    CLI::App* evaluate = app.add_subcommand(
        "evaluate", "score an outcomes file into report.json / report.txt");
    evaluate->add_option("--outcomes", outcomes_path, "outcomes.jsonl path")
        ->required();
    evaluate->add_option("--schema", eval_schema, "label schema JSON")
        ->required();
    evaluate->add_option("--output-dir", eval_output,
                         "report directory (default: next to the outcomes)");
    evaluate->add_option("--seed", eval_seed,
                         "seed recorded in run metadata");
    evaluate->callback([&] {
        exit_code = chatagri::cmd_evaluate(outcomes_path, eval_schema,
                                           eval_output, eval_seed, std::cout);
    });

    auto select_args = std::make_shared<ConfigArgs>();
    std::string candidates_path;
    CLI::App* select = app.add_subcommand(
        "select-prompt",
        "pick the best candidate template by sampled accuracy");
    add_config_flags(select, select_args);
    select->add_option("--candidates", candidates_path,
                       "JSON list of candidate templates")
        ->required();
    select->callback([&, select_args] {
        exit_code = chatagri::cmd_select_prompt(assemble(*select_args),
                                                candidates_path, std::cout);
    });

    auto trigger_args = std::make_shared<ConfigArgs>();
    std::string task_name;
    uint64_t trigger_k = 5;
    CLI::App* trigger = app.add_subcommand(
        "trigger-prompts", "ask the model itself for candidate templates");
    add_config_flags(trigger, trigger_args);
    trigger->add_option("--task", task_name, "task name for the meta-prompt")
        ->required();
    trigger->add_option("-k,--count", trigger_k,
                        "number of templates to request");
    trigger->callback([&, trigger_args] {
        exit_code = chatagri::cmd_trigger_prompts(
            assemble(*trigger_args), task_name,
            static_cast<size_t>(trigger_k), std::cout);
    });

    std::string align_answer;
    std::string align_schema;
    std::string align_rules;
    CLI::App* align = app.add_subcommand(
        "align", "map one model answer onto a schema label");
    align->add_option("answer", align_answer, "the model answer text")
        ->required();
    align->add_option("--schema", align_schema, "label schema JSON")
        ->required();
    align->add_option("--rules", align_rules,
                      "rule-set JSON (default: built-in rules)");
    align->callback([&] {
        exit_code = chatagri::cmd_align(align_answer, align_schema,
                                        align_rules, std::cout);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const chatagri::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const chatagri::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
