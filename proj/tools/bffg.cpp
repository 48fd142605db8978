#include <iostream>

#include "CLI11.hpp"

#include "bffg/cli_commands.hpp"

int main(int argc, char** argv)
{
    bffg::cli::Options o;
    CLI::App app{"Backward filtering forward guiding on directed trees"};
    app.add_option("command", o.command, "validate | likelihood | sample | infer")
        ->required()
        ->check(CLI::IsMember({"validate", "likelihood", "sample", "infer"}));
    app.add_option("model", o.model_path, "model file (JSON)")->required();
    app.add_option("--seed", o.seed, "random seed (required by sample and infer)");
    app.add_option("--n", o.n, "number of guided samples (sample, default 1000)");
    app.add_option("--iters", o.iters, "MCMC iterations (infer, default 1000)");
    app.add_option("--theta-grid", o.theta_grid, "parameter grid a:b:step (likelihood)");
    app.add_option("--theta", o.theta, "comma-separated parameter values (default: init values)");
    app.add_flag("--oracle", o.oracle, "append brute-force enumeration values (likelihood)");
    app.add_option("--out", o.out, "write the CSV table/trace to this file");
    app.add_option("--paths", o.paths, "write discretized SDE paths to this file (sample)");
    app.add_option("--burn", o.burn, "iterations dropped from the summary (infer)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return bffg::cli::validation_failure;
    }
    return bffg::cli::run(o, std::cout, std::cerr);
}
