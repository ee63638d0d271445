#include <iostream>

#include "CLI11.hpp"
#include "esnmpc/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ESN-compensated MPC experiments on a spring-damper plant"};
    app.require_subcommand(1, 1);

    esnmpc::cli::Invocation inv;
    std::uint64_t seed = 0;
    std::size_t steps = 0;
    std::size_t washout = 0;

    const std::pair<const char*, const char*> commands[] = {
        {"collect", "Phase 1: nominal MPC on the true plant; writes dataset.csv and nominal_run.csv"},
        {"train", "Fit the ESN readout on dataset.csv; writes weights.json and training_report.json"},
        {"run", "Phase 2: compensated MPC with weights.json; writes compensated_run.csv"},
        {"predict", "Open-loop residual prediction on dataset.csv; writes prediction.csv"},
        {"full", "All stages plus metrics.json and figures"},
        {"report", "Render fig4.svg and fig5.svg from existing CSVs"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", inv.config_path, "Experiment config file (defaults when omitted)");
        sub->add_option("--out", inv.output_dir, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Override the experiment seed");
        sub->add_option("--steps", steps, "Override experiment.steps");
        sub->add_option("--washout", washout, "Override esn.washout");
        sub->callback([&inv, sub, &seed, &steps, &washout] {
            inv.subcommand = sub->get_name();
            if (sub->count("--seed")) inv.seed = seed;
            if (sub->count("--steps")) inv.steps = steps;
            if (sub->count("--washout")) inv.washout = washout;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    return esnmpc::cli::run_subcommand(inv, std::cerr);
}
