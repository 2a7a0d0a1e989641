#pragma once

// Closed-loop conductance programming on top of the transient engine.

#include <string>
#include <vector>

#include "regmem/analog_frontend.hpp"
#include "regmem/crossbar_network.hpp"
#include "regmem/transient_engine.hpp"

namespace regmem {

enum class ProgramMode { VoltageMode, CurrentMode };

struct ProgramTarget {
    int row = 0, col = 0;
    double g_target = 0.0;    ///< S at the verify read voltage
    double tolerance = 0.05;  ///< relative half-width of the band
    ProgramMode mode = ProgramMode::VoltageMode;
    int max_pulses = 32;

    double g_low() const { return g_target * (1.0 - tolerance); }
    double g_high() const { return g_target * (1.0 + tolerance); }
    bool in_band(double g) const { return g >= g_low() && g <= g_high(); }
};

/// How the next write pulse is chosen.
///  ComplianceBisection: Table II amplitudes and width; SET pulses carry a
///    compliance limit bisected in log space, every overshoot is undone by a
///    full RESET. In current mode the source current is bisected instead.
///  WidthHalving: Table II amplitudes, width halved after every change of
///    write direction.
enum class VerifyPolicy { ComplianceBisection, WidthHalving };

const char* to_string(VerifyPolicy p);

struct VerifyOptions {
    VerifyPolicy policy = VerifyPolicy::ComplianceBisection;
    double set_amplitude = 0.75;   ///< V
    double reset_amplitude = 1.5;  ///< V, regulated down to the dropout limit
    double width = 1e-3;           ///< s
    double min_width = 1e-12;      ///< s, WidthHalving floor
    double i_cc_min = 1e-6;        ///< A, lower end of the compliance bracket
    TransientOptions transient;
};

struct PulseRecord {
    int index = 0;
    WriteMode mode = WriteMode::VoltageSet;
    double amplitude = 0.0;  ///< V or A actually applied
    double width = 0.0;
    double compliance = 0.0; ///< A, voltage SET only
    double g_after = 0.0;
};

struct ProgramReport {
    int row = 0, col = 0;
    bool success = false;
    std::string status;      ///< "ok", "max_pulses", "unreachable"
    int pulses = 0;
    double g_target = 0.0;
    double g_initial = 0.0;
    double g_final = 0.0;
    double rel_error = 0.0;  ///< (g_final - g_target) / g_target
    std::vector<PulseRecord> trajectory;
};

/// Verify read: cell in Read mode with its row regulated at `v_read` on the
/// AE, columns on the ADC, every other cell GroundedBoth. Returns I_col/v_read.
double read_conductance(int row, int col, const ArrayConfig& cfg, const FrontEnd& fe,
                        const std::vector<DeviceState>& states, const DeviceParams& p,
                        const SolverOptions& solver = {}, double v_read = 0.0);

/// Achievable verify-read range of one cell: its read with the state at
/// n_disc_min and at n_disc_max.
struct ConductanceRange {
    double g_hrs = 0.0;
    double g_lrs = 0.0;
};
ConductanceRange achievable_range(int row, int col, const ArrayConfig& cfg, const FrontEnd& fe,
                                  const std::vector<DeviceState>& states, const DeviceParams& p,
                                  const SolverOptions& solver = {});

/// Read-verify loop. Mutates `states`. Throws Unreachable when the band does
/// not intersect the achievable range; running out of pulses is reported.
ProgramReport read_verify_program(const ProgramTarget& target, std::vector<DeviceState>& states,
                                  const ArrayConfig& cfg, const FrontEnd& fe, const DeviceParams& p,
                                  const VerifyOptions& opt = {});

struct CurrentLevelReport {
    double i_requested = 0.0;
    double i_applied = 0.0;
    int dac_code = -1;
    /// First time n_disc >= 0.99 n_disc_max, +inf if never within the run.
    double t_switch = 0.0;
    /// First time the device read conductance doubles, +inf if never.
    double t_double = 0.0;
    double g_initial = 0.0;
    double g_final = 0.0;
    double n_final = 0.0;
    bool g_monotone = true;
    std::vector<double> t;  ///< samples of the run
    std::vector<double> g;  ///< device read conductance at each sample
};

/// Constant-current SET of one HRS cell at each level for `duration`.
/// Throws PreStateNotHRS unless n_disc <= 1.01 n_disc_min.
std::vector<CurrentLevelReport> current_mode_set(int row, int col,
                                                 const std::vector<double>& i_levels,
                                                 double duration, const ArrayConfig& cfg,
                                                 const FrontEnd& fe,
                                                 const std::vector<DeviceState>& states,
                                                 const DeviceParams& p,
                                                 const TransientOptions& opt = {});

struct WeightMapSpec {
    double g_min = 0.0, g_max = 0.0;
    double w_min = 0.0, w_max = 1.0;
    double tolerance = 0.05;
    ProgramMode mode = ProgramMode::VoltageMode;
    int max_pulses = 32;

    void validate() const;
    double to_conductance(double w) const;
    double to_weight(double g) const;
};

struct WeightMap {
    int n_rows = 0, n_cols = 0;
    std::vector<ProgramTarget> targets;  ///< row-major
    /// First-order conductance step of one write-DAC LSB at the SET amplitude.
    double g_resolution = 0.0;
    double w_resolution = 0.0;
    bool band_above_resolution = true;
};

/// Affine weight-to-conductance map. Throws WeightOutOfRange.
WeightMap map_weights(const std::vector<std::vector<double>>& w, const WeightMapSpec& spec,
                      const DacSpec& dac, double set_amplitude = 0.75);

struct ArrayReport {
    std::vector<ProgramReport> cells;
    int succeeded = 0;
    int failed = 0;
};

/// Programs each target in order, one cell at a time. Per-cell failures are
/// reported, not thrown.
ArrayReport program_array(const std::vector<ProgramTarget>& targets,
                          std::vector<DeviceState>& states, const ArrayConfig& cfg,
                          const FrontEnd& fe, const DeviceParams& p, const VerifyOptions& opt = {});

}  // namespace regmem
