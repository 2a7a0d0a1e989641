#pragma once

// Time marching of a whole array: operating point with frozen device states,
// then each device advanced with its branch voltage held over the step.

#include <string>
#include <vector>

#include "regmem/analog_frontend.hpp"
#include "regmem/crossbar_network.hpp"
#include "regmem/device_model.hpp"

namespace regmem {

/// Drives and cell modes held over [t_start, t_end).
struct StimulusEvent {
    double t_start = 0.0;
    double t_end = 0.0;
    DriveSet drives;
    std::vector<CellMode> modes;
    std::string label;
};

/// Time-ordered, non-overlapping events. Gaps are idle: every cell
/// GroundedBoth and every row grounded.
struct StimulusSchedule {
    double duration = 0.0;
    std::vector<StimulusEvent> events;

    /// Throws InvalidArgument on overlap, disorder or size mismatch.
    void validate(const ArrayConfig& cfg) const;
    /// Every event edge plus 0 and the duration, sorted and unique.
    std::vector<double> breakpoints() const;
};

/// One cell selected in `mode`, everything else GroundedBoth; the cell's row
/// carries `drive`, all other rows grounded, all columns on the ADC.
StimulusEvent single_cell_event(const ArrayConfig& cfg, int row, int col, CellMode mode,
                                const RowDrive& drive, double t_start, double t_end,
                                std::string label = {});

struct TransientOptions {
    double dt_max = 1e-5;           ///< s
    double max_rel_change = 1e-2;   ///< per accepted step, any device
    double dt_min = 1e-21;          ///< s, below this the step is abandoned
    IntegratorOptions integrator;
    SolverOptions solver;
    bool record = true;             ///< keep every sample (otherwise only the last)
};

struct WaveformRecord {
    int n_rows = 0, n_cols = 0;
    std::vector<double> time;
    // per sample, row-major cells
    std::vector<std::vector<double>> device_v;
    std::vector<std::vector<double>> device_i;
    std::vector<std::vector<double>> device_n;
    std::vector<std::vector<double>> column_i;
    std::vector<std::vector<double>> drive_i;
    std::vector<DeviceState> final_states;
    long accepted_steps = 0;
    long rejected_steps = 0;

    std::size_t samples() const { return time.size(); }
};

/// Throws NonConvergence / StepTooLarge prefixed with the failing time.
WaveformRecord run_transient(const StimulusSchedule& schedule, const ArrayConfig& cfg,
                             const std::vector<DeviceState>& initial, const DeviceParams& p,
                             const TransientOptions& opt = {});

enum class WriteMode { VoltageSet, VoltageReset, CurrentSet };

const char* to_string(WriteMode m);

struct WritePulse {
    WriteMode mode = WriteMode::VoltageSet;
    /// Voltage modes: requested reference magnitude in V (DAC-quantized,
    /// then regulated). Current mode: requested current in A.
    double amplitude = 0.75;
    double width = 1e-3;
    /// Voltage modes: sourced current limit, 0 uses the regulator's.
    double compliance = 0.0;
};

struct WriteOutcome {
    std::vector<DeviceState> states;
    double applied = 0.0;   ///< V imposed at the cell or A sourced
    int dac_code = 0;
    bool limited = false;   ///< compliance or headroom engaged at some step
    WaveformRecord record;
};

/// Single-cell write. Voltage SET drives the OE (AE grounded), voltage RESET
/// drives the AE (OE grounded), both regulated at the cell terminal; current
/// SET sources into the OE. Throws AmplitudeOutOfRange.
WriteOutcome apply_write_pulse(int row, int col, const WritePulse& pulse, const ArrayConfig& cfg,
                               const FrontEnd& fe, const std::vector<DeviceState>& states,
                               const DeviceParams& p, const TransientOptions& opt = {});

/// Row drive and cell mode realizing a write pulse.
struct WriteDrive {
    CellMode mode = CellMode::GroundedBoth;
    RowDrive drive;
    double applied = 0.0;
    int dac_code = 0;
};
WriteDrive write_drive(int col, const WritePulse& pulse, const FrontEnd& fe);

}  // namespace regmem
