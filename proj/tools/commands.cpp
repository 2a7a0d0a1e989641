#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include "regmem/csv.hpp"
#include "regmem/errors.hpp"

namespace regmem::cli {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string header(const RunContext& ctx, const std::vector<std::string>& extra = {}) {
    std::ostringstream out;
    write_csv_header(out, ctx.command_line, ctx.cfg.hash(), extra);
    return out.str();
}

DeviceState parse_state(const std::string& s, const DeviceParams& p, const std::string& key) {
    if (s == "hrs") return hrs_state(p);
    if (s == "lrs") return lrs_state(p);
    const double n = parse_double(s, key + ": ");
    if (!(n >= p.n_disc_min && n <= p.n_disc_max))
        throw ConfigError(key + " outside [n_disc_min, n_disc_max]");
    return {n};
}

// Row drive regulated at the cell's AE for a read.
RowDrive read_drive(double v_read, int col, const FrontEnd& fe) {
    if (!(v_read > 0.0 && v_read <= fe.adc.v_read_safe))
        throw ReadVoltageOutOfRange("read voltage " + format_double(v_read) +
                                    " V outside (0, " + format_double(fe.adc.v_read_safe) + "]");
    const DacLevel lvl = quantize_to_dac(v_read, fe.dac);
    return RowDrive::voltage(regulate_voltage(lvl.volts, fe.regulator), kInf, col);
}

std::vector<std::string> split_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto b = tok.find_first_not_of(" \t");
        const auto e = tok.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(tok.substr(b, e - b + 1));
    }
    return out;
}

}  // namespace

void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
    if (n <= 0) return;
    jobs = std::max(1, std::min(jobs, n));
    std::vector<std::exception_ptr> errors(n);
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) {
            pool.emplace_back([&] {
                for (int i = next++; i < n; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<DeviceState> read_states(const std::string& path, int n_rows, int n_cols) {
    const NumericTable t = read_numeric_csv(path);
    if (static_cast<int>(t.rows.size()) != n_rows || static_cast<int>(t.rows[0].size()) != n_cols)
        throw ParseError(path + ": expected a " + std::to_string(n_rows) + "x" +
                         std::to_string(n_cols) + " n_disc matrix");
    std::vector<DeviceState> s;
    for (const auto& row : t.rows) {
        for (double n : row) s.push_back({n});
    }
    return s;
}

std::string states_csv(const std::vector<DeviceState>& states, int n_rows, int n_cols,
                       const RunContext& ctx) {
    std::ostringstream out;
    out << header(ctx, {"n_disc per cell, rows x columns"});
    for (int r = 0; r < n_rows; ++r) {
        std::vector<double> row;
        for (int c = 0; c < n_cols; ++c) row.push_back(states[r * n_cols + c].n_disc);
        write_csv_row(out, row);
    }
    return out.str();
}

// ---------------------------------------------------------------- sweep

std::string cmd_sweep(const RunContext& ctx, const SweepArgs& args) {
    const ExperimentConfig& cfg = ctx.cfg;
    std::vector<double> rates = args.rates.empty() ? std::vector<double>{cfg.sweep.rate} : args.rates;
    for (double r : rates) {
        if (!(r > 0.0)) throw InvalidArgument("sweep rate must be > 0");
    }
    std::vector<double> peaks = cfg.sweep.peaks;
    if (args.v_max > 0.0) peaks = {args.v_max, -args.v_max, 0.0};
    const DeviceState initial = parse_state(cfg.sweep.initial, cfg.device, "sweep.initial");
    SweepOptions opt;
    opt.dv = cfg.sweep.dv;
    opt.integrator = cfg.integrator;

    std::vector<std::vector<SweepSample>> traces(rates.size());
    parallel_for(static_cast<int>(rates.size()), ctx.jobs, [&](int k) {
        traces[k] = quasi_static_sweep(cfg.sweep.v_start, peaks, rates[k], cfg.device, initial, opt);
    });

    std::ostringstream out;
    out << header(ctx);
    const bool multi = rates.size() > 1;
    if (multi) write_csv_row(out, std::vector<std::string>{"rate", "t", "v", "i", "n_disc"});
    else write_csv_row(out, std::vector<std::string>{"t", "v", "i", "n_disc"});
    for (std::size_t k = 0; k < traces.size(); ++k) {
        for (const auto& s : traces[k]) {
            if (multi) write_csv_row(out, std::vector<double>{rates[k], s.t, s.v, s.i, s.state.n_disc});
            else write_csv_row(out, std::vector<double>{s.t, s.v, s.i, s.state.n_disc});
        }
    }
    return out.str();
}

// ---------------------------------------------------------------- pulse

std::string cmd_pulse(const RunContext& ctx, const PulseArgs& args) {
    const ExperimentConfig& cfg = ctx.cfg;
    const ArrayConfig& ac = cfg.array;
    const int row = cfg.pulse.row, col = cfg.pulse.col;
    if (row < 0 || row >= ac.n_rows || col < 0 || col >= ac.n_cols)
        throw ConfigError("pulse.row/pulse.col outside the array");

    StimulusSchedule sched;
    double t = 0.0;
    const double w = cfg.pulse.width;
    for (const std::string& tok : split_tokens(cfg.pulse.sequence)) {
        const auto colon = tok.find(':');
        const std::string kind = tok.substr(0, colon);
        const bool has_value = colon != std::string::npos;
        const double value = has_value ? parse_double(tok.substr(colon + 1), "pulse.sequence: ") : 0.0;
        double amp = 0.0;
        StimulusEvent ev;
        if (kind == "read") {
            amp = has_value ? value : cfg.fe.adc.v_read_default;
            if (amp != 0.0)
                ev = single_cell_event(ac, row, col, CellMode::Read, read_drive(amp, col, cfg.fe), t,
                                       t + w, tok);
        } else if (kind == "set" || kind == "reset" || kind == "iset") {
            WritePulse wp;
            wp.width = w;
            if (kind == "set") {
                wp.mode = WriteMode::VoltageSet;
                wp.amplitude = has_value ? value : cfg.pulse.set_amplitude;
            } else if (kind == "reset") {
                wp.mode = WriteMode::VoltageReset;
                wp.amplitude = has_value ? value : cfg.pulse.reset_amplitude;
            } else {
                if (!has_value) throw ConfigError("pulse.sequence: iset needs a current, e.g. iset:1e-5");
                wp.mode = WriteMode::CurrentSet;
                wp.amplitude = value;
            }
            amp = wp.amplitude;
            if (amp != 0.0) {
                const WriteDrive d = write_drive(col, wp, cfg.fe);
                ev = single_cell_event(ac, row, col, d.mode, d.drive, t, t + w, tok);
            }
        } else if (kind != "idle") {
            throw ConfigError("pulse.sequence: unknown token '" + tok + "'");
        }
        // zero amplitude and idle tokens leave the array idle for one width
        if (amp != 0.0) sched.events.push_back(std::move(ev));
        t += w + cfg.pulse.gap;
    }
    if (t == 0.0) throw ConfigError("pulse.sequence is empty");
    sched.duration = t;

    TransientOptions opt = cfg.transient_options();
    for (int k = 0; k < args.halve_dt; ++k) {
        opt.dt_max *= 0.5;
        opt.max_rel_change *= 0.5;
        opt.integrator.max_rel_change *= 0.5;
    }
    const WaveformRecord rec = run_transient(sched, ac, cfg.initial_states(), cfg.device, opt);

    const int cell = ac.index(row, col);
    std::ostringstream out;
    out << header(ctx, {"cell: row " + std::to_string(row) + ", column " + std::to_string(col),
                        "final n_disc: " + format_double(rec.final_states[cell].n_disc)});
    write_csv_row(out, std::vector<std::string>{"t", "event", "v_cell", "i_cell", "n_disc",
                                                "i_column", "i_drive"});
    std::size_t e = 0;
    for (std::size_t k = 0; k < rec.samples(); ++k) {
        const double tk = rec.time[k];
        while (e < sched.events.size() && sched.events[e].t_end <= tk) ++e;
        const bool active = e < sched.events.size() && sched.events[e].t_start <= tk;
        write_csv_row(out, std::vector<std::string>{
                               format_double(tk), active ? sched.events[e].label : "idle",
                               format_double(rec.device_v[k][cell]),
                               format_double(rec.device_i[k][cell]),
                               format_double(rec.device_n[k][cell]),
                               format_double(rec.column_i[k][col]),
                               format_double(rec.drive_i[k][row])});
    }
    return out.str();
}

// ---------------------------------------------------------------- program

ProgramOutput cmd_program(const RunContext& ctx, const ProgramArgs& args) {
    ExperimentConfig cfg = ctx.cfg;
    const auto w = read_numeric_csv(args.weights_path).rows;
    // the weight matrix fixes the array size
    cfg.array.n_rows = static_cast<int>(w.size());
    cfg.array.n_cols = static_cast<int>(w[0].size());
    const ArrayConfig& ac = cfg.array;

    std::vector<DeviceState> states =
        args.states_in.empty() ? cfg.initial_states() : read_states(args.states_in, ac.n_rows, ac.n_cols);

    WeightMapSpec spec;
    spec.w_min = cfg.program.w_min;
    spec.w_max = cfg.program.w_max;
    spec.tolerance = cfg.program.tolerance;
    spec.mode = cfg.program.mode;
    spec.max_pulses = cfg.program.max_pulses;
    spec.g_min = cfg.program.g_min;
    spec.g_max = cfg.program.g_max;
    if (spec.g_min == 0.0 || spec.g_max == 0.0) {
        const ConductanceRange rg = achievable_range(0, 0, ac, cfg.fe, states, cfg.device, cfg.solver);
        if (spec.g_min == 0.0) spec.g_min = rg.g_hrs;
        if (spec.g_max == 0.0) spec.g_max = rg.g_lrs;
    }
    const WeightMap map = map_weights(w, spec, cfg.fe.dac, cfg.pulse.set_amplitude);
    const ArrayReport rep = program_array(map.targets, states, ac, cfg.fe, cfg.device, cfg.verify_options());

    RunContext out_ctx = ctx;
    out_ctx.cfg = cfg;
    ProgramOutput out;
    std::ostringstream csv;
    csv << header(out_ctx, {"g_min: " + format_double(spec.g_min) + " S, g_max: " +
                                format_double(spec.g_max) + " S",
                            "g_resolution: " + format_double(map.g_resolution) + " S"});
    write_csv_row(csv, std::vector<std::string>{"row", "col", "weight", "g_target", "g_initial",
                                                "g_final", "weight_final", "rel_error", "pulses",
                                                "status"});
    for (const ProgramReport& r : rep.cells) {
        write_csv_row(csv, std::vector<std::string>{
                               std::to_string(r.row), std::to_string(r.col),
                               format_double(w[r.row][r.col]), format_double(r.g_target),
                               format_double(r.g_initial), format_double(r.g_final),
                               format_double(spec.to_weight(r.g_final)),
                               format_double(r.rel_error), std::to_string(r.pulses), r.status});
    }
    out.report_csv = csv.str();
    out.states_csv = states_csv(states, ac.n_rows, ac.n_cols, out_ctx);

    std::ostringstream txt;
    txt << "programmed " << rep.succeeded << "/" << rep.cells.size() << " cells ("
        << ac.n_rows << "x" << ac.n_cols << ", " << to_string(cfg.program.policy) << ")\n";
    for (const ProgramReport& r : rep.cells) {
        char line[160];
        std::snprintf(line, sizeof line, "  (%d,%d) target %.4g S  final %.4g S  err %+.2f%%  %d pulses  %s\n",
                      r.row, r.col, r.g_target, r.g_final, 100.0 * r.rel_error, r.pulses,
                      r.status.c_str());
        txt << line;
    }
    if (!map.band_above_resolution)
        txt << "warning: the tolerance band is narrower than one write-DAC step\n";
    out.summary = txt.str();
    out.all_succeeded = rep.failed == 0;
    return out;
}

// ---------------------------------------------------------------- vmm

std::string cmd_vmm(const RunContext& ctx, const VmmArgs& args) {
    const ExperimentConfig& cfg = ctx.cfg;
    const ArrayConfig& ac = cfg.array;
    const std::vector<DeviceState> states =
        args.states_path.empty() ? cfg.initial_states() : read_states(args.states_path, ac.n_rows, ac.n_cols);
    std::vector<double> fixed_g;
    if (!args.fixed_g_path.empty()) {
        const NumericTable t = read_numeric_csv(args.fixed_g_path);
        if (static_cast<int>(t.rows.size()) != ac.n_rows || static_cast<int>(t.rows[0].size()) != ac.n_cols)
            throw ParseError(args.fixed_g_path + ": expected a " + std::to_string(ac.n_rows) + "x" +
                             std::to_string(ac.n_cols) + " conductance matrix");
        for (const auto& row : t.rows) {
            for (double g : row) {
                if (!(g >= 0.0)) throw ParseError(args.fixed_g_path + ": conductances must be >= 0");
                fixed_g.push_back(g);
            }
        }
    }
    const NumericTable in = read_numeric_csv(args.input_path);
    if (static_cast<int>(in.rows[0].size()) != ac.n_rows)
        throw ParseError(args.input_path + ": each input row needs " + std::to_string(ac.n_rows) +
                         " voltages");

    std::vector<VmmResult> res(in.rows.size());
    parallel_for(static_cast<int>(in.rows.size()), ctx.jobs, [&](int k) {
        res[k] = vmm(in.rows[k], states, ac, cfg.fe.adc, cfg.device, cfg.solver, fixed_g);
    });

    std::ostringstream out;
    out << header(ctx, {fixed_g.empty() ? "cells: device model" : "cells: fixed conductances"});
    std::vector<std::string> head{"input"};
    for (int r = 0; r < ac.n_rows; ++r) head.push_back("v" + std::to_string(r));
    for (int c = 0; c < ac.n_cols; ++c) head.push_back("i" + std::to_string(c));
    for (int c = 0; c < ac.n_cols; ++c) head.push_back("code" + std::to_string(c));
    write_csv_row(out, head);
    for (std::size_t k = 0; k < res.size(); ++k) {
        std::vector<std::string> row{std::to_string(k)};
        for (double v : in.rows[k]) row.push_back(format_double(v));
        for (double i : res[k].column_current) row.push_back(format_double(i));
        for (const auto& a : res[k].codes) row.push_back(std::to_string(a.code));
        write_csv_row(out, row);
    }
    return out.str();
}

// ---------------------------------------------------------------- transient

std::string cmd_transient(const RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.cfg;
    const ArrayConfig& ac = cfg.array;
    const DriveSettings& ds = cfg.drive;
    if (static_cast<int>(ds.v.size()) != ac.n_rows)
        throw ConfigError("drive.v needs one voltage per row (" + std::to_string(ac.n_rows) + ")");

    DriveSet on = DriveSet::idle(ac);
    on.cols.assign(ac.n_cols, ds.column);
    for (int r = 0; r < ac.n_rows; ++r) {
        const double v = ds.v[r];
        if (v == 0.0) continue;
        if (v < 0.0) throw ConfigError("drive.v must be >= 0");
        const DacLevel lvl = quantize_to_dac(v, cfg.fe.dac);
        on.rows[r] = RowDrive::voltage(regulate_voltage(lvl.volts, cfg.fe.regulator),
                                       cfg.fe.regulator.i_compliance);
    }
    StimulusSchedule sched;
    sched.duration = ds.period * ds.periods;
    for (int k = 0; k < ds.periods; ++k) {
        StimulusEvent ev;
        ev.t_start = k * ds.period;
        ev.t_end = std::min(ev.t_start + ds.width, sched.duration);
        ev.drives = on;
        ev.modes.assign(ac.cells(), CellMode::Read);
        ev.label = "read";
        sched.events.push_back(std::move(ev));
    }
    const WaveformRecord rec =
        run_transient(sched, ac, cfg.initial_states(), cfg.device, cfg.transient_options());

    std::ostringstream out;
    out << header(ctx);
    std::vector<std::string> head{"t"};
    for (int r = 0; r < ac.n_rows; ++r) head.push_back("i_drive" + std::to_string(r));
    for (int c = 0; c < ac.n_cols; ++c) head.push_back("i_col" + std::to_string(c));
    for (int r = 0; r < ac.n_rows; ++r)
        for (int c = 0; c < ac.n_cols; ++c)
            head.push_back("n_" + std::to_string(r) + "_" + std::to_string(c));
    write_csv_row(out, head);
    for (std::size_t k = 0; k < rec.samples(); ++k) {
        std::vector<double> row{rec.time[k]};
        row.insert(row.end(), rec.drive_i[k].begin(), rec.drive_i[k].end());
        row.insert(row.end(), rec.column_i[k].begin(), rec.column_i[k].end());
        row.insert(row.end(), rec.device_n[k].begin(), rec.device_n[k].end());
        write_csv_row(out, row);
    }
    return out.str();
}

}  // namespace regmem::cli
