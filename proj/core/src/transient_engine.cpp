#include "regmem/transient_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "regmem/errors.hpp"

namespace regmem {

namespace {

std::string at_time(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "t=%.9g s", t);
    return buf;
}

StimulusEvent idle_event(const ArrayConfig& cfg) {
    StimulusEvent e;
    e.drives = DriveSet::idle(cfg);
    e.modes.assign(cfg.cells(), CellMode::GroundedBoth);
    return e;
}

}  // namespace

void StimulusSchedule::validate(const ArrayConfig& cfg) const {
    if (!(duration > 0.0)) throw InvalidArgument("schedule duration must be > 0");
    double last = 0.0;
    for (std::size_t k = 0; k < events.size(); ++k) {
        const auto& e = events[k];
        if (!(e.t_start >= last && e.t_end > e.t_start))
            throw InvalidArgument("schedule event " + std::to_string(k) +
                                  " overlaps or is out of order");
        if (e.t_end > duration) throw InvalidArgument("schedule event past the duration");
        if (static_cast<int>(e.modes.size()) != cfg.cells() ||
            static_cast<int>(e.drives.rows.size()) != cfg.n_rows ||
            static_cast<int>(e.drives.cols.size()) != cfg.n_cols)
            throw InvalidArgument("schedule event " + std::to_string(k) +
                                  " does not match the array size");
        last = e.t_end;
    }
}

std::vector<double> StimulusSchedule::breakpoints() const {
    std::vector<double> b{0.0, duration};
    for (const auto& e : events) {
        b.push_back(e.t_start);
        b.push_back(e.t_end);
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

StimulusEvent single_cell_event(const ArrayConfig& cfg, int row, int col, CellMode mode,
                                const RowDrive& drive, double t_start, double t_end,
                                std::string label) {
    if (row < 0 || row >= cfg.n_rows || col < 0 || col >= cfg.n_cols)
        throw InvalidArgument("cell (" + std::to_string(row) + ", " + std::to_string(col) +
                              ") outside the array");
    StimulusEvent e = idle_event(cfg);
    e.t_start = t_start;
    e.t_end = t_end;
    e.modes[cfg.index(row, col)] = mode;
    e.drives.rows[row] = drive;
    e.label = std::move(label);
    return e;
}

WaveformRecord run_transient(const StimulusSchedule& schedule, const ArrayConfig& cfg,
                             const std::vector<DeviceState>& initial, const DeviceParams& p,
                             const TransientOptions& opt) {
    schedule.validate(cfg);
    if (!(opt.dt_max > 0.0)) throw InvalidArgument("dt_max must be > 0");
    if (static_cast<int>(initial.size()) != cfg.cells())
        throw InvalidArgument("initial state grid does not match the array size");

    const int cells = cfg.cells();
    std::vector<DeviceState> states(initial);
    for (auto& s : states) s.n_disc = std::clamp(s.n_disc, p.n_disc_min, p.n_disc_max);

    const std::vector<double> edges = schedule.breakpoints();
    const StimulusEvent idle = idle_event(cfg);

    WaveformRecord rec;
    rec.n_rows = cfg.n_rows;
    rec.n_cols = cfg.n_cols;
    auto record = [&](double t, const OperatingPoint& op) {
        if (!opt.record && !rec.time.empty()) {
            rec.time.clear();
            rec.device_v.clear();
            rec.device_i.clear();
            rec.device_n.clear();
            rec.column_i.clear();
            rec.drive_i.clear();
        }
        rec.time.push_back(t);
        rec.device_v.push_back(op.device_voltage);
        rec.device_i.push_back(op.device_current);
        std::vector<double> n(cells);
        for (int k = 0; k < cells; ++k) n[k] = states[k].n_disc;
        rec.device_n.push_back(std::move(n));
        rec.column_i.push_back(op.column_current);
        rec.drive_i.push_back(op.drive_current);
    };

    // event active at t (right-continuous)
    std::size_t cursor = 0;
    auto active = [&](double t) -> const StimulusEvent& {
        while (cursor < schedule.events.size() && schedule.events[cursor].t_end <= t) ++cursor;
        if (cursor < schedule.events.size() && schedule.events[cursor].t_start <= t)
            return schedule.events[cursor];
        return idle;
    };

    OperatingPoint op;
    bool have_op = false;
    double t = 0.0;
    std::size_t edge_idx = 1;
    try {
        while (t < schedule.duration) {
            while (edge_idx < edges.size() && edges[edge_idx] <= t) ++edge_idx;
            const double next_edge = edges[edge_idx];
            const StimulusEvent& ev = active(t);
            const auto net = build_network(cfg, ev.modes, ev.drives, states);
            op = solve_operating_point(net, p, opt.solver, have_op ? &op : nullptr);
            have_op = true;
            record(t, op);

            // step proposal from the present rates
            double dt = std::min(opt.dt_max, next_edge - t);
            for (int k = 0; k < cells; ++k) {
                const double rate = state_derivative(op.device_voltage[k], states[k], p);
                if (rate != 0.0)
                    dt = std::min(dt, 0.5 * opt.max_rel_change * states[k].n_disc / std::abs(rate));
            }
            std::vector<DeviceState> next(cells);
            for (;;) {
                if (dt < opt.dt_min)
                    throw StepTooLarge("time step fell below " + std::to_string(opt.dt_min) + " s");
                bool ok = true;
                for (int k = 0; k < cells && ok; ++k) {
                    try {
                        next[k] = integrate_step(states[k], op.device_voltage[k], dt, p, opt.integrator);
                    } catch (const StepTooLarge&) {
                        ok = false;
                        break;
                    }
                    const double change = std::abs(next[k].n_disc - states[k].n_disc);
                    if (change > opt.max_rel_change * states[k].n_disc) ok = false;
                }
                if (ok) break;
                ++rec.rejected_steps;
                dt *= 0.5;
            }
            states = std::move(next);
            ++rec.accepted_steps;
            // land exactly on event edges
            t = (t + dt >= next_edge || next_edge - (t + dt) < 1e-15 * next_edge) ? next_edge : t + dt;
        }
        const StimulusEvent& ev = active(t);
        const auto net = build_network(cfg, ev.modes, ev.drives, states);
        op = solve_operating_point(net, p, opt.solver, have_op ? &op : nullptr);
        record(t, op);
    } catch (const NumericalError&) {
        rethrow_with_context(at_time(t));
    }
    rec.final_states = states;
    return rec;
}

const char* to_string(WriteMode m) {
    switch (m) {
        case WriteMode::VoltageSet: return "vset";
        case WriteMode::VoltageReset: return "vreset";
        case WriteMode::CurrentSet: return "iset";
    }
    return "?";
}

WriteDrive write_drive(int col, const WritePulse& pulse, const FrontEnd& fe) {
    WriteDrive w;
    if (pulse.mode == WriteMode::CurrentSet) {
        const double i_lo = regulated_current(fe.dac.v_max, fe.isource);
        const double i_hi = regulated_current(fe.dac.v_min, fe.isource);
        if (!(pulse.amplitude >= i_lo && pulse.amplitude <= i_hi))
            throw AmplitudeOutOfRange("write current " + std::to_string(pulse.amplitude) +
                                      " A outside [" + std::to_string(i_lo) + ", " +
                                      std::to_string(i_hi) + "] A");
        const CurrentLevel lv = quantize_current(pulse.amplitude, fe.dac, fe.isource);
        w.mode = CellMode::CurrentWrite;
        w.drive = RowDrive::current(lv.amperes, fe.isource.v_dd);
        w.applied = lv.amperes;
        w.dac_code = lv.code;
        return w;
    }
    if (!(pulse.amplitude >= fe.regulator.v_in_min && pulse.amplitude <= fe.regulator.v_in_max &&
          pulse.amplitude >= fe.dac.v_min && pulse.amplitude <= fe.dac.v_max))
        throw AmplitudeOutOfRange("write voltage " + std::to_string(pulse.amplitude) +
                                  " V outside the regulator input range");
    const DacLevel lv = quantize_to_dac(pulse.amplitude, fe.dac);
    const double v = regulate_voltage(lv.volts, fe.regulator);
    const double icc = pulse.compliance > 0.0 ? pulse.compliance : fe.regulator.i_compliance;
    w.mode = pulse.mode == WriteMode::VoltageSet ? CellMode::VoltageWriteOE : CellMode::VoltageWriteAE;
    w.drive = RowDrive::voltage(v, icc, col);
    w.applied = v;
    w.dac_code = lv.code;
    return w;
}

WriteOutcome apply_write_pulse(int row, int col, const WritePulse& pulse, const ArrayConfig& cfg,
                               const FrontEnd& fe, const std::vector<DeviceState>& states,
                               const DeviceParams& p, const TransientOptions& opt) {
    if (!(pulse.width > 0.0)) throw InvalidArgument("write pulse width must be > 0");
    const WriteDrive w = write_drive(col, pulse, fe);
    StimulusSchedule s;
    s.duration = pulse.width;
    s.events.push_back(single_cell_event(cfg, row, col, w.mode, w.drive, 0.0, pulse.width,
                                         to_string(pulse.mode)));
    WriteOutcome out;
    out.record = run_transient(s, cfg, states, p, opt);
    out.states = out.record.final_states;
    out.applied = w.applied;
    out.dac_code = w.dac_code;
    // a limited drive shows up as a sourced current pinned at the limit
    if (w.drive.kind == RowDriveKind::Voltage) {
        for (const auto& d : out.record.drive_i) {
            if (std::abs(d[row]) >= w.drive.compliance * (1.0 - 1e-12)) out.limited = true;
        }
    }
    return out;
}

}  // namespace regmem
