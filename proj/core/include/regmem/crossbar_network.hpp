#pragma once

// Nonlinear resistive network of an n x m 2T1R array: memristors, per-cell
// selector switches, lumped wire segments, regulated row drives and column
// terminations, solved by Newton iteration on modified nodal analysis.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "regmem/analog_frontend.hpp"
#include "regmem/device_model.hpp"

namespace regmem {

struct ArrayConfig {
    int n_rows = 2;
    int n_cols = 2;
    double r_seg_row = 1.0;      ///< Ohm per row segment, 0 = ideal wire
    double r_seg_col = 1.0;      ///< Ohm per column segment, 0 = ideal wire
    double r_switch_on = 100.0;  ///< closed analog switch, Ohm
    double r_switch_off = 1e8;   ///< open analog switch, Ohm
    bool ideal_switches = false; ///< closed = short, open = removed

    int cells() const { return n_rows * n_cols; }
    int index(int r, int c) const { return r * n_cols + c; }
    void validate() const;
};

/// Ideal interconnect: zero wire resistance and ideal switches.
ArrayConfig ideal_interconnect(int n_rows, int n_cols);

/// How a cell's two selector switches are thrown.
///  GroundedBoth   AE->ground  OE->ground   (unselected)
///  VoltageWriteAE AE->row     OE->ground
///  VoltageWriteOE AE->ground  OE->row
///  CurrentWrite   AE->ground  OE->row
///  Read           AE->row     OE->column
///  HalfSelect     AE->row     OE->column   (unselected cell left on the
///                 lines, as in a 1T1R array)
enum class CellMode { GroundedBoth, VoltageWriteAE, VoltageWriteOE, CurrentWrite, Read, HalfSelect };

const char* to_string(CellMode m);

enum class Throw { Ground, Row, Column };
Throw ae_throw(CellMode m);
Throw oe_throw(CellMode m);

enum class RowDriveKind { Grounded, Voltage, Current };

struct RowDrive {
    RowDriveKind kind = RowDriveKind::Grounded;
    double value = 0.0;  ///< V or A
    /// Voltage drives: |sourced current| limit (pass-transistor compliance).
    double compliance = std::numeric_limits<double>::infinity();
    /// Current drives: highest driver node voltage (supply headroom).
    double headroom = std::numeric_limits<double>::infinity();
    /// Voltage drives: -1 regulates the driver node, otherwise the row-side
    /// electrode of the cell in this column is the regulated node.
    int sense_col = -1;

    static RowDrive grounded() { return {}; }
    static RowDrive voltage(double v, double compliance = std::numeric_limits<double>::infinity(),
                            int sense_col = -1);
    static RowDrive current(double i, double headroom = std::numeric_limits<double>::infinity());
};

enum class ColumnTermination { Ground, Adc, Vdd };

struct DriveSet {
    std::vector<RowDrive> rows;
    std::vector<ColumnTermination> cols;
    double v_dd = 1.8;   ///< level of a Vdd termination
    double v_adc = 0.0;  ///< input level held by the current-mode ADC

    /// All rows grounded, all columns on the ADC.
    static DriveSet idle(const ArrayConfig& cfg);
};

enum class BranchKind { RowWire, ColumnWire, SwitchLeg, Memristor };

/// Two-terminal element in the canonical graph; r == 0 is an ideal short.
struct Branch {
    BranchKind kind = BranchKind::RowWire;
    int a = 0, b = 0;       ///< raw node indices
    double r = 0.0;
    int cell = -1;          ///< owning cell for legs and memristors
    int electrode = -1;     ///< legs: 0 = AE, 1 = OE
    Throw leg = Throw::Ground;
    bool on = false;        ///< legs: the selected throw
};

/// Canonical node/branch graph of one configured array.
///
/// Raw nodes, row-major: 0 is ground, then per cell AE, OE, row line tap,
/// column line tap, then one driver node per row, then one termination node
/// per column.
struct NetworkDescription {
    ArrayConfig cfg;
    std::vector<CellMode> modes;
    DriveSet drives;
    std::vector<DeviceState> states;
    /// Per memristor: NaN uses the device model, otherwise a fixed linear
    /// conductance in S.
    std::vector<double> fixed_conductance;

    std::vector<std::string> node_names;
    std::vector<Branch> branches;

    int ae(int cell) const { return 1 + 4 * cell; }
    int oe(int cell) const { return 2 + 4 * cell; }
    int row_tap(int cell) const { return 3 + 4 * cell; }
    int col_tap(int cell) const { return 4 + 4 * cell; }
    int driver(int row) const { return 1 + 4 * cfg.cells() + row; }
    int termination(int col) const { return 1 + 4 * cfg.cells() + cfg.n_rows + col; }
    int node_count() const { return 1 + 4 * cfg.cells() + cfg.n_rows + cfg.n_cols; }

    int count(BranchKind k) const;
    int switch_count() const { return 2 * cfg.cells(); }
    int row_sources() const;
};

/// Throws InconsistentDrive when drives, modes and dimensions disagree.
NetworkDescription build_network(const ArrayConfig& cfg, const std::vector<CellMode>& modes,
                                 const DriveSet& drives, const std::vector<DeviceState>& states,
                                 const std::vector<double>& fixed_conductance = {});

/// FNV-1a over the canonical graph, modes and drives.
std::uint64_t structural_hash(const NetworkDescription& net);

struct SolverOptions {
    double fd_step = 1e-3;          ///< V, central difference for device slopes
    int max_iterations = 200;
    double residual_tol = 1e-9;     ///< KCL residual relative to incident current
    double residual_floor = 1e-18;  ///< A
    double dv_tol = 1e-6;           ///< V
    double max_step = 0.5;          ///< V, Newton limit on any memristor bias change
    int source_steps = 10;
};

struct OperatingPoint {
    std::vector<double> node_voltage;    ///< per raw node
    std::vector<double> device_voltage;  ///< V(AE) - V(OE), row-major cells
    std::vector<double> device_current;  ///< AE -> OE
    std::vector<double> row_leg_current; ///< per cell, from the row line into the cell
    std::vector<double> col_leg_current; ///< per cell, from the cell into the column line
    std::vector<double> drive_current;   ///< per row, sourced into the array
    std::vector<double> drive_voltage;   ///< per row, driver node
    std::vector<double> column_current;  ///< per column, into the termination
    std::vector<bool> row_limited;       ///< compliance or headroom engaged
    int iterations = 0;
    int source_steps = 0;
    double max_scaled_residual = 0.0;
};

/// DC operating point. `guess` (may be null) seeds the node voltages.
/// Throws NonConvergence or SingularMatrix.
OperatingPoint solve_operating_point(const NetworkDescription& net, const DeviceParams& p,
                                     const SolverOptions& opt = {},
                                     const OperatingPoint* guess = nullptr);

struct VmmResult {
    std::vector<double> column_current;
    std::vector<AdcReading> codes;
    OperatingPoint op;
};

/// All cells in Read mode, rows regulated at `v` (driver-sensed), columns on
/// the ADC. Throws ReadVoltageOutOfRange for v outside [0, adc.v_read_safe].
VmmResult vmm(const std::vector<double>& v, const std::vector<DeviceState>& states,
              const ArrayConfig& cfg, const AdcSpec& adc, const DeviceParams& p,
              const SolverOptions& opt = {}, const std::vector<double>& fixed_conductance = {});

struct SneakEntry {
    int row = 0, col = 0;
    double current = 0.0;  ///< |I| through the memristor
    bool flagged = false;
};

/// |I| through every unselected (GroundedBoth or HalfSelect) memristor.
std::vector<SneakEntry> sneak_current_report(const NetworkDescription& net,
                                             const OperatingPoint& op, double threshold = 1e-9);

struct NamedValue {
    std::string name;
    double value = 0.0;
};

/// (node, voltage) pairs in canonical order.
std::vector<NamedValue> node_table(const NetworkDescription& net, const OperatingPoint& op);
/// (branch, current) pairs: memristors, row legs, column legs, drives, columns.
std::vector<NamedValue> branch_table(const NetworkDescription& net, const OperatingPoint& op);

}  // namespace regmem
