// regmem: command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.

#include <cstdio>
#include <filesystem>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "regmem/csv.hpp"
#include "regmem/errors.hpp"

namespace {

int emit(const std::string& content, const std::string& path, bool force) {
    if (path.empty() || path == "-") {
        std::fwrite(content.data(), 1, content.size(), stdout);
        return 0;
    }
    regmem::write_file(path, content, force);
    return 0;
}

std::string joined(int argc, char** argv) {
    std::string s = "regmem";
    for (int i = 1; i < argc; ++i) {
        s += ' ';
        s += argv[i];
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Behavioral simulator for 2T1R memristor crossbar arrays"};
    app.set_version_flag("--version", regmem::version_string());
    app.require_subcommand(1);

    std::vector<std::string> config_files;
    std::vector<std::string> overrides;
    std::string out_path;
    bool force = false;
    int jobs = 1;
    bool dump_config = false;

    app.add_option("-c,--config", config_files, "Config file, later files override earlier ones")
        ->check(CLI::ExistingFile);
    app.add_option("-s,--set", overrides, "Override one key, e.g. --set array.n_rows=4");
    app.add_option("-o,--out", out_path, "Output CSV path (default: stdout)");
    app.add_flag("-f,--force", force, "Allow replacing existing output files");
    app.add_option("-j,--jobs", jobs, "Worker threads for independent sweep points")
        ->check(CLI::PositiveNumber);
    app.add_flag("--dump-config", dump_config, "Print the resolved configuration to stderr");

    regmem::cli::SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "Quasi-static bipolar I-V sweep of one device");
    sweep->add_option("--rate", sweep_args.rates, "Sweep rate in V/s; repeat for several sweeps");
    sweep->add_option("--vmax", sweep_args.v_max, "Symmetric peaks +vmax, -vmax, 0 instead of sweep.peaks")
        ->check(CLI::PositiveNumber);

    regmem::cli::PulseArgs pulse_args;
    auto* pulse = app.add_subcommand("pulse", "Single-cell pulse sequence through the transient engine");
    pulse->add_flag("--halve-dt", pulse_args.halve_dt,
                    "Halve the time step and step tolerances (repeatable)");

    regmem::cli::ProgramArgs program_args;
    std::string states_out;
    auto* program = app.add_subcommand("program", "Read-verify programming of a weight matrix");
    program->add_option("weights", program_args.weights_path, "Weight matrix CSV")
        ->required()
        ->check(CLI::ExistingFile);
    program->add_option("--states-in", program_args.states_in, "Initial n_disc matrix CSV")
        ->check(CLI::ExistingFile);
    program->add_option("--states-out", states_out, "Where to write the programmed n_disc matrix");

    regmem::cli::VmmArgs vmm_args;
    auto* vmm = app.add_subcommand("vmm", "Vector-matrix multiply through the array");
    vmm->add_option("input", vmm_args.input_path, "Input voltage vectors, one per row")
        ->required()
        ->check(CLI::ExistingFile);
    vmm->add_option("--states", vmm_args.states_path, "n_disc matrix CSV (default: array.initial)")
        ->check(CLI::ExistingFile);
    vmm->add_option("--fixed-g", vmm_args.fixed_g_path,
                    "Replace every device by a linear conductance matrix in S")
        ->check(CLI::ExistingFile);

    auto* transient = app.add_subcommand("transient", "PWM row drive of the whole array over time");

    // global options may also follow the subcommand name
    for (auto* sub : {sweep, pulse, program, vmm, transient}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        regmem::cli::RunContext ctx;
        for (const auto& f : config_files) ctx.cfg.load_file(f);
        for (const auto& o : overrides) ctx.cfg.apply_override(o);
        ctx.cfg.validate();
        ctx.command_line = joined(argc, argv);
        ctx.jobs = jobs;
        if (dump_config) std::cerr << ctx.cfg.canonical();

        // refuse before spending time on the run
        if (!force) {
            for (const auto& p : {out_path, states_out}) {
                if (!p.empty() && p != "-" && std::filesystem::exists(p))
                    throw regmem::OutputExists("refusing to overwrite '" + p + "' (use --force)");
            }
        }
        if (sweep->parsed()) return emit(regmem::cli::cmd_sweep(ctx, sweep_args), out_path, force);
        if (pulse->parsed()) return emit(regmem::cli::cmd_pulse(ctx, pulse_args), out_path, force);
        if (vmm->parsed()) return emit(regmem::cli::cmd_vmm(ctx, vmm_args), out_path, force);
        if (transient->parsed()) return emit(regmem::cli::cmd_transient(ctx), out_path, force);
        if (program->parsed()) {
            const auto res = regmem::cli::cmd_program(ctx, program_args);
            std::cerr << res.summary;
            emit(res.report_csv, out_path, force);
            if (!states_out.empty()) emit(res.states_csv, states_out, force);
            return 0;
        }
    } catch (const regmem::InputError& e) {
        std::cerr << "regmem: " << e.what() << "\n";
        return 1;
    } catch (const regmem::NumericalError& e) {
        std::cerr << "regmem: numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "regmem: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
