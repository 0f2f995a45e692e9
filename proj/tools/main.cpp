#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "actiongram/experiment.hpp"

using namespace actiongram;

namespace {

int run_spec(const std::string& spec_path, bool ablate) {
    std::ifstream in(spec_path);
    if (!in) {
        std::cerr << "cannot open spec '" << spec_path << "'\n";
        return 1;
    }
    ExperimentSpec spec;
    try {
        ConfigDoc doc = ConfigDoc::parse(in);
        spec = ExperimentSpec::from_config(doc,
                                           std::filesystem::path(spec_path).parent_path());
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }
    if (ablate) spec = ablation_spec(spec);
    try {
        std::filesystem::path dir = run_experiment(spec, std::cerr);
        std::ifstream summary(dir / "summary.csv");
        std::cout << summary.rdbuf();
        std::cerr << "outputs in " << dir.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

int run_grammar(const std::string& file, const std::string& calculator, int k) {
    std::ifstream in(file);
    if (!in) {
        std::cerr << "cannot open '" << file << "'\n";
        return 1;
    }
    try {
        std::vector<int> seq = parse_symbol_sequence(in);
        CalculatorKind kind = parse_calculator(calculator);
        if (k < 2) {
            std::cerr << "k must be >= 2\n";
            return 1;
        }
        grammar_report(seq, kind, k, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"action-grammar reinforcement learning experiments"};
    app.require_subcommand(1);

    std::string spec_path;
    std::string grammar_file;
    std::string calculator = "sequitur";
    int k = 2;

    CLI::App* cmd_run = app.add_subcommand("run", "run every variant x seed from a spec file");
    cmd_run->add_option("spec", spec_path, "experiment spec file")->required();

    CLI::App* cmd_ablate =
        app.add_subcommand("ablate", "run the ablation grid derived from a spec file");
    cmd_ablate->add_option("spec", spec_path, "experiment spec file")->required();

    CLI::App* cmd_grammar =
        app.add_subcommand("grammar", "infer a grammar over a symbol file and print macros");
    cmd_grammar->add_option("file", grammar_file, "whitespace-separated integer symbols")
        ->required();
    cmd_grammar->add_option("--calculator", calculator, "sequitur|k|mdl");
    cmd_grammar->add_option("--k", k, "repetition threshold for the k calculator");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (cmd_run->parsed()) return run_spec(spec_path, false);
    if (cmd_ablate->parsed()) return run_spec(spec_path, true);
    return run_grammar(grammar_file, calculator, k);
}
