#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "colearn/scenario.hpp"

namespace {

struct CommonOpts {
    std::string scenario;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--scenario", opts.scenario, "Scenario JSON file")->required();
    char* env_dir = std::getenv("COLEARN_OUT_DIR");
    opts.out = env_dir ? env_dir : ".";
    cmd->add_option("--out", opts.out, "Output directory");
    cmd->add_option("--seed", opts.seed, "Seed override");
    cmd->add_option("--workers", opts.workers, "Worker threads")
        ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collaborative-learning incentive benchmark runner"};
    app.require_subcommand(1);

    const char* kinds[] = {"scheme", "game", "vcg", "verify", "estimate", "sweep"};
    CommonOpts opts;
    for (const char* kind : kinds)
        add_common(app.add_subcommand(kind, std::string("Run a ") + kind + " scenario"), opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const std::string chosen = app.get_subcommands().front()->get_name();
    try {
        auto scenario = colearn::load_scenario(opts.scenario);
        if (chosen != colearn::to_string(scenario.experiment))
            throw colearn::config_error("scenario experiment '" +
                                        std::string(colearn::to_string(scenario.experiment)) +
                                        "' does not match subcommand '" + chosen + "'");
        auto result = colearn::run_scenario(scenario, opts.seed, opts.workers);
        colearn::write_run(result, opts.out);
        std::cout << "wrote " << result.files.size() << " file(s) to " << opts.out << "\n";
        std::cout << result.summary["derived"].dump(2) << "\n";
        return 0;
    } catch (const colearn::infeasible_verification_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const colearn::solver_convergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const colearn::size_refusal_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const colearn::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
