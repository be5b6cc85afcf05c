#include "opacity/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Opacity-maximizing policy search for partially observed MDPs"};
    app.require_subcommand(1);

    opacity::CommandOptions options;
    std::uint64_t seed = 0;
    std::string out;
    std::string mode;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"solve", "Run the primal-dual solver and write the log, policy, and summary"},
        {"grad-check", "Compare analytic gradients with central differences"},
        {"oracle-check", "Verify message-passing identities and the sampled estimator"},
        {"baseline-sweep", "Compare entropy-regularized policies with the primal-dual solution"},
        {"build-grid", "Write the configured model as a model document"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", options.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Override the master seed");
        sub->add_option("--out", out, "Override the output prefix");
        sub->add_option("--mode", mode, "Override the entropy mode")->check(CLI::IsMember({"exact", "sampled"}));
        sub->add_flag("--timing", options.timing, "Record wall-clock milliseconds in the log");
        sub->add_flag("--quiet", options.quiet, "Suppress progress output");
        if (name == "grad-check")
            sub->add_flag("--corrupt-gradient", options.corrupt_gradient)->group("");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : opacity::kExitUsage;
    }

    CLI::App* chosen = app.get_subcommands().front();
    if (chosen->count("--seed") > 0) options.seed = seed;
    if (chosen->count("--out") > 0) options.out = out;
    if (chosen->count("--mode") > 0)
        options.mode = mode == "exact" ? opacity::EntropyMode::Exact : opacity::EntropyMode::Sampled;
    return opacity::run_command(chosen->get_name(), options, std::cout, std::cerr);
}
