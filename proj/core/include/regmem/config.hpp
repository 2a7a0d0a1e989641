#pragma once

// Layered key-value experiment configuration.
//
// File format: one `name = value` per line, `#` starts a comment. Device
// parameters use their bare field names; everything else is prefixed with
// its section (dac., regulator., isource., adc., array., solver.,
// integrator., transient., sweep., pulse., program., drive.). Later layers
// override earlier ones; unknown keys are rejected with their line number.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "regmem/analog_frontend.hpp"
#include "regmem/crossbar_network.hpp"
#include "regmem/device_model.hpp"
#include "regmem/programming_control.hpp"
#include "regmem/transient_engine.hpp"

namespace regmem {

struct SweepSettings {
    double v_start = 0.0;
    std::vector<double> peaks{1.5, -1.0, 0.0};
    double rate = 0.67;  ///< V/s
    double dv = 1e-3;    ///< V between emitted samples
    std::string initial = "lrs";
};

struct PulseSettings {
    /// Comma-separated tokens: read, reset, set, iset:<A>, idle.
    std::string sequence = "read,reset,read,set,read";
    int row = 0, col = 0;
    double width = 1e-3;
    double gap = 0.0;            ///< idle time after each pulse, s
    double set_amplitude = 0.75;
    double reset_amplitude = 1.5;
};

struct ProgramSettings {
    VerifyPolicy policy = VerifyPolicy::ComplianceBisection;
    ProgramMode mode = ProgramMode::VoltageMode;
    double tolerance = 0.05;
    int max_pulses = 32;
    double i_cc_min = 1e-6;
    double min_width = 1e-12;
    /// Weight mapping; g_min/g_max of 0 take the achievable cell range.
    double w_min = 0.0, w_max = 1.0;
    double g_min = 0.0, g_max = 0.0;
};

/// Row drive pattern of the `transient` command: PWM read pulses on every
/// row with all cells in Read mode.
struct DriveSettings {
    std::vector<double> v{0.25, 0.25};  ///< per-row regulated voltage, V
    double width = 1e-3;
    double period = 1e-3;
    int periods = 10;
    ColumnTermination column = ColumnTermination::Adc;
};

struct ExperimentConfig {
    DeviceParams device;
    FrontEnd fe;
    ArrayConfig array;
    SolverOptions solver;
    IntegratorOptions integrator;
    double dt_max = 1e-5;
    double max_rel_change = 1e-2;
    SweepSettings sweep;
    PulseSettings pulse;
    ProgramSettings program;
    DriveSettings drive;
    /// Initial array state: "hrs", "lrs" or a number (n_disc).
    std::string initial_state = "hrs";
    std::uint64_t seed = 1;

    /// Applies one assignment. `where` names the source for error messages.
    void set(const std::string& key, const std::string& value, const std::string& where = "");
    /// Layers a file over the current values. Throws ConfigError / ParseError.
    void load_file(const std::string& path);
    /// Parses `key=value` (the --set form).
    void apply_override(const std::string& assignment);

    std::vector<std::string> keys() const;
    std::string get(const std::string& key) const;
    /// Every key in sorted order as `key = value` lines.
    std::string canonical() const;
    std::uint64_t hash() const;
    void validate() const;

    TransientOptions transient_options() const;
    VerifyOptions verify_options() const;
    std::vector<DeviceState> initial_states() const;

private:
    struct Binding {
        std::function<void(const std::string&)> set;
        std::function<std::string()> get;
    };
    // built on demand so that copies never alias another object's fields
    std::map<std::string, Binding> table() const;
};

/// Shortest round-trip decimal form.
std::string format_double(double x);
double parse_double(const std::string& s, const std::string& where);

}  // namespace regmem
