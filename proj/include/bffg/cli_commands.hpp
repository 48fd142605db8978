#ifndef BFFG_CLI_COMMANDS_HPP
#define BFFG_CLI_COMMANDS_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bffg/linalg.hpp"

namespace bffg::cli {

enum ExitCode : int { ok = 0, validation_failure = 1, runtime_failure = 2, stalled = 3 };

struct Options {
    std::string command;
    std::string model_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n;
    std::optional<std::size_t> iters;
    std::optional<std::string> theta_grid;
    /// Comma-separated parameter values; defaults to each parameter's init.
    std::optional<std::string> theta;
    bool oracle = false;
    std::optional<std::string> out;
    /// Extra output file for the discretized SDE paths of `sample`.
    std::optional<std::string> paths;
    std::size_t burn = 0;
};

/// Values a, a + step, ... up to b (inclusive, with a small tolerance) from "a:b:step".
std::vector<double> parse_theta_grid(const std::string& text);

/// Decimal text with 17 significant digits (lossless for doubles).
std::string format_number(double v);

/// Runs one command, writing results to `out` and diagnostics to `err`. Returns the exit code.
int run(const Options& options, std::ostream& out, std::ostream& err);

} // namespace bffg::cli

#endif // BFFG_CLI_COMMANDS_HPP
