#include "regmem/programming_control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "regmem/errors.hpp"

namespace regmem {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_cell(int row, int col, const ArrayConfig& cfg) {
    if (row < 0 || row >= cfg.n_rows || col < 0 || col >= cfg.n_cols)
        throw InvalidArgument("cell (" + std::to_string(row) + ", " + std::to_string(col) +
                              ") outside the " + std::to_string(cfg.n_rows) + "x" +
                              std::to_string(cfg.n_cols) + " array");
}

}  // namespace

const char* to_string(VerifyPolicy p) {
    return p == VerifyPolicy::ComplianceBisection ? "compliance_bisection" : "width_halving";
}

double read_conductance(int row, int col, const ArrayConfig& cfg, const FrontEnd& fe,
                        const std::vector<DeviceState>& states, const DeviceParams& p,
                        const SolverOptions& solver, double v_read) {
    check_cell(row, col, cfg);
    if (v_read == 0.0) v_read = fe.adc.v_read_default;
    if (!(v_read > 0.0 && v_read <= fe.adc.v_read_safe))
        throw ReadVoltageOutOfRange("verify read voltage " + std::to_string(v_read) + " V");
    std::vector<CellMode> modes(cfg.cells(), CellMode::GroundedBoth);
    modes[cfg.index(row, col)] = CellMode::Read;
    DriveSet d = DriveSet::idle(cfg);
    d.rows[row] = RowDrive::voltage(v_read, kInf, col);
    const auto net = build_network(cfg, modes, d, states);
    const auto op = solve_operating_point(net, p, solver);
    return op.column_current[col] / v_read;
}

ConductanceRange achievable_range(int row, int col, const ArrayConfig& cfg, const FrontEnd& fe,
                                  const std::vector<DeviceState>& states, const DeviceParams& p,
                                  const SolverOptions& solver) {
    check_cell(row, col, cfg);
    std::vector<DeviceState> s(states);
    ConductanceRange r;
    s[cfg.index(row, col)] = hrs_state(p);
    r.g_hrs = read_conductance(row, col, cfg, fe, s, p, solver);
    s[cfg.index(row, col)] = lrs_state(p);
    r.g_lrs = read_conductance(row, col, cfg, fe, s, p, solver);
    return r;
}

ProgramReport read_verify_program(const ProgramTarget& target, std::vector<DeviceState>& states,
                                  const ArrayConfig& cfg, const FrontEnd& fe, const DeviceParams& p,
                                  const VerifyOptions& opt) {
    check_cell(target.row, target.col, cfg);
    if (!(target.g_target > 0.0)) throw InvalidArgument("target conductance must be > 0");
    if (!(target.tolerance > 0.0 && target.tolerance < 1.0))
        throw InvalidArgument("tolerance band must be in (0, 1)");
    if (target.max_pulses < 0) throw InvalidArgument("max_pulses must be >= 0");
    if (static_cast<int>(states.size()) != cfg.cells())
        throw InvalidArgument("state grid does not match the array size");

    const SolverOptions& solver = opt.transient.solver;
    const ConductanceRange range = achievable_range(target.row, target.col, cfg, fe, states, p, solver);
    if (target.g_high() < range.g_hrs || target.g_low() > range.g_lrs) {
        throw Unreachable("target " + std::to_string(target.g_target) + " S outside the achievable [" +
                          std::to_string(range.g_hrs) + ", " + std::to_string(range.g_lrs) + "] S");
    }

    const bool current_mode = target.mode == ProgramMode::CurrentMode;
    // knob bracket: SET compliance (voltage mode) or source current (current mode)
    double knob_min = opt.i_cc_min;
    double knob_max = fe.regulator.i_compliance;
    if (current_mode) {
        knob_min = regulated_current(fe.dac.v_max, fe.isource);
        knob_max = regulated_current(fe.dac.v_min, fe.isource);
    }
    double lo = knob_min, hi = knob_max, knob = hi;
    double width = opt.width;
    int last_dir = 0;

    ProgramReport rep;
    rep.row = target.row;
    rep.col = target.col;
    rep.g_target = target.g_target;
    double g = read_conductance(target.row, target.col, cfg, fe, states, p, solver);
    rep.g_initial = g;
    for (;;) {
        if (target.in_band(g)) {
            rep.success = true;
            rep.status = "ok";
            break;
        }
        if (rep.pulses >= target.max_pulses) {
            rep.status = "max_pulses";
            break;
        }
        const int dir = g < target.g_low() ? +1 : -1;
        WritePulse pulse;
        pulse.width = opt.width;
        if (dir < 0) {
            pulse.mode = WriteMode::VoltageReset;
            pulse.amplitude = opt.reset_amplitude;
        } else if (current_mode) {
            pulse.mode = WriteMode::CurrentSet;
            pulse.amplitude = opt.policy == VerifyPolicy::ComplianceBisection ? knob : knob_max;
        } else {
            pulse.mode = WriteMode::VoltageSet;
            pulse.amplitude = opt.set_amplitude;
            if (opt.policy == VerifyPolicy::ComplianceBisection) pulse.compliance = knob;
        }
        if (opt.policy == VerifyPolicy::WidthHalving) {
            if (last_dir != 0 && dir != last_dir) width = std::max(0.5 * width, opt.min_width);
            pulse.width = width;
        }
        last_dir = dir;

        const WriteOutcome w =
            apply_write_pulse(target.row, target.col, pulse, cfg, fe, states, p, opt.transient);
        states = w.states;
        ++rep.pulses;
        const double g_new = read_conductance(target.row, target.col, cfg, fe, states, p, solver);
        rep.trajectory.push_back({rep.pulses, pulse.mode, w.applied, pulse.width,
                                  pulse.mode == WriteMode::VoltageSet
                                      ? (pulse.compliance > 0.0 ? pulse.compliance
                                                                : fe.regulator.i_compliance)
                                      : 0.0,
                                  g_new});

        if (opt.policy == VerifyPolicy::ComplianceBisection && dir > 0) {
            if (g_new > target.g_high()) hi = knob;
            else if (g_new < target.g_low()) lo = knob;
            if (hi <= lo * 1.001) {
                // bracket collapsed without hitting the band: start over
                lo = knob_min;
                hi = knob_max;
            }
            knob = std::sqrt(lo * hi);
        }
        g = g_new;
    }
    rep.g_final = g;
    rep.rel_error = (g - target.g_target) / target.g_target;
    return rep;
}

std::vector<CurrentLevelReport> current_mode_set(int row, int col,
                                                 const std::vector<double>& i_levels,
                                                 double duration, const ArrayConfig& cfg,
                                                 const FrontEnd& fe,
                                                 const std::vector<DeviceState>& states,
                                                 const DeviceParams& p,
                                                 const TransientOptions& opt) {
    check_cell(row, col, cfg);
    if (!(duration > 0.0)) throw InvalidArgument("current-mode duration must be > 0");
    const int k = cfg.index(row, col);
    if (states[k].n_disc > 1.01 * p.n_disc_min)
        throw PreStateNotHRS("cell (" + std::to_string(row) + ", " + std::to_string(col) +
                             ") is not in HRS (n_disc = " + std::to_string(states[k].n_disc) + ")");

    const double v_read = fe.adc.v_read_default;
    std::vector<CurrentLevelReport> out;
    for (double level : i_levels) {
        if (level < 0.0) throw AmplitudeOutOfRange("current levels must be >= 0");
        CurrentLevelReport r;
        r.i_requested = level;
        StimulusSchedule s;
        s.duration = duration;
        if (level > 0.0) {
            WritePulse pulse;
            pulse.mode = WriteMode::CurrentSet;
            pulse.amplitude = level;
            pulse.width = duration;
            const WriteDrive w = write_drive(col, pulse, fe);
            r.i_applied = w.applied;
            r.dac_code = w.dac_code;
            s.events.push_back(single_cell_event(cfg, row, col, w.mode, w.drive, 0.0, duration, "iset"));
        }
        TransientOptions o = opt;
        o.record = true;
        const WaveformRecord rec = run_transient(s, cfg, states, p, o);
        r.t_switch = kInf;
        r.t_double = kInf;
        for (std::size_t j = 0; j < rec.samples(); ++j) {
            const double n = rec.device_n[j][k];
            const double g = conductance_readout({n}, p, v_read);
            r.t.push_back(rec.time[j]);
            r.g.push_back(g);
            if (j == 0) r.g_initial = g;
            if (j > 0 && g < r.g[j - 1]) r.g_monotone = false;
            if (r.t_switch == kInf && n >= 0.99 * p.n_disc_max) r.t_switch = rec.time[j];
            if (r.t_double == kInf && g >= 2.0 * r.g_initial) r.t_double = rec.time[j];
        }
        r.g_final = r.g.back();
        r.n_final = rec.final_states[k].n_disc;
        out.push_back(std::move(r));
    }
    return out;
}

void WeightMapSpec::validate() const {
    if (!(g_min > 0.0 && g_min < g_max)) throw ConfigError("weight map needs 0 < g_min < g_max");
    if (!(w_min < w_max)) throw ConfigError("weight map needs w_min < w_max");
    if (!(tolerance > 0.0 && tolerance < 1.0)) throw ConfigError("weight map tolerance in (0, 1)");
}

double WeightMapSpec::to_conductance(double w) const {
    return g_min + (w - w_min) / (w_max - w_min) * (g_max - g_min);
}

double WeightMapSpec::to_weight(double g) const {
    return w_min + (g - g_min) / (g_max - g_min) * (w_max - w_min);
}

WeightMap map_weights(const std::vector<std::vector<double>>& w, const WeightMapSpec& spec,
                      const DacSpec& dac, double set_amplitude) {
    spec.validate();
    if (w.empty() || w.front().empty()) throw InvalidArgument("empty weight matrix");
    WeightMap m;
    m.n_rows = static_cast<int>(w.size());
    m.n_cols = static_cast<int>(w.front().size());
    m.g_resolution = dac.lsb / set_amplitude * spec.g_max;
    m.w_resolution = m.g_resolution * (spec.w_max - spec.w_min) / (spec.g_max - spec.g_min);
    for (int r = 0; r < m.n_rows; ++r) {
        if (static_cast<int>(w[r].size()) != m.n_cols)
            throw InvalidArgument("weight row " + std::to_string(r) + " has " +
                                  std::to_string(w[r].size()) + " entries, expected " +
                                  std::to_string(m.n_cols));
        for (int c = 0; c < m.n_cols; ++c) {
            const double x = w[r][c];
            if (!(x >= spec.w_min && x <= spec.w_max))
                throw WeightOutOfRange("weight (" + std::to_string(r) + ", " + std::to_string(c) +
                                       ") = " + std::to_string(x) + " outside [" +
                                       std::to_string(spec.w_min) + ", " +
                                       std::to_string(spec.w_max) + "]");
            ProgramTarget t;
            t.row = r;
            t.col = c;
            t.g_target = spec.to_conductance(x);
            t.tolerance = spec.tolerance;
            t.mode = spec.mode;
            t.max_pulses = spec.max_pulses;
            if (2.0 * t.tolerance * t.g_target <= m.g_resolution) m.band_above_resolution = false;
            m.targets.push_back(t);
        }
    }
    return m;
}

ArrayReport program_array(const std::vector<ProgramTarget>& targets,
                          std::vector<DeviceState>& states, const ArrayConfig& cfg,
                          const FrontEnd& fe, const DeviceParams& p, const VerifyOptions& opt) {
    ArrayReport out;
    for (const auto& t : targets) {
        ProgramReport r;
        try {
            r = read_verify_program(t, states, cfg, fe, p, opt);
        } catch (const Unreachable&) {
            r.row = t.row;
            r.col = t.col;
            r.g_target = t.g_target;
            r.status = "unreachable";
            r.g_initial = r.g_final = read_conductance(t.row, t.col, cfg, fe, states, p, opt.transient.solver);
            r.rel_error = (r.g_final - t.g_target) / t.g_target;
        } catch (const NumericalError& e) {
            r.row = t.row;
            r.col = t.col;
            r.g_target = t.g_target;
            r.status = std::string("numerical: ") + e.what();
        }
        if (r.success) ++out.succeeded; else ++out.failed;
        out.cells.push_back(std::move(r));
    }
    return out;
}

}  // namespace regmem
