#include <CLI11.hpp>

#include "selfexpl/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Self-explanation faithfulness harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::string command;
    for (const auto& name : {"build-dataset", "validate-dataset", "evaluate", "analyze"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "run configuration (json)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->callback([&command, name]() { command = name; });
    }

    CLI11_PARSE(app, argc, argv);
    return selfexpl::commands::run_command(command, config_path);
}
