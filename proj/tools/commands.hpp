#pragma once

// Subcommand bodies of the regmem tool. Each returns the CSV text it would
// write; main() owns argument parsing, files and exit codes.

#include <functional>
#include <string>
#include <vector>

#include "regmem/config.hpp"

namespace regmem::cli {

struct RunContext {
    ExperimentConfig cfg;
    std::string command_line;  ///< echoed into every CSV header
    int jobs = 1;
};

struct SweepArgs {
    std::vector<double> rates;  ///< empty: sweep.rate
    double v_max = 0.0;         ///< > 0 replaces sweep.peaks with {+v_max, -v_max, 0}
};
std::string cmd_sweep(const RunContext& ctx, const SweepArgs& args);

struct PulseArgs {
    int halve_dt = 0;  ///< halve dt_max and the step tolerances this many times
};
std::string cmd_pulse(const RunContext& ctx, const PulseArgs& args);

struct ProgramArgs {
    std::string weights_path;
    std::string states_in;  ///< optional n_disc matrix
};
struct ProgramOutput {
    std::string report_csv;
    std::string states_csv;
    std::string summary;  ///< human-readable
    bool all_succeeded = true;
};
ProgramOutput cmd_program(const RunContext& ctx, const ProgramArgs& args);

struct VmmArgs {
    std::string states_path;   ///< optional n_disc matrix
    std::string input_path;    ///< one input vector per row
    std::string fixed_g_path;  ///< optional linear conductances in S
};
std::string cmd_vmm(const RunContext& ctx, const VmmArgs& args);

std::string cmd_transient(const RunContext& ctx);

/// n_disc matrix as written by `program` and read by `vmm`.
std::vector<DeviceState> read_states(const std::string& path, int n_rows, int n_cols);
std::string states_csv(const std::vector<DeviceState>& states, int n_rows, int n_cols,
                       const RunContext& ctx);

/// Runs body(i) for i in [0, n) on up to `jobs` threads; rethrows the first
/// exception in index order.
void parallel_for(int n, int jobs, const std::function<void(int)>& body);

}  // namespace regmem::cli
