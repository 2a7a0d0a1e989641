// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Quantities from the transient criteria are recomputed
// under refined step control at the end (criterion 9).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dense_nodal.hpp"
#include "reference_device.hpp"
#include "regmem/config.hpp"
#include "regmem/regmem.hpp"

using namespace regmem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const DeviceParams kP;
const FrontEnd kFe;

struct Verdict {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double x) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::vector<DeviceState> uniform(const ArrayConfig& c, DeviceState s) {
    return std::vector<DeviceState>(c.cells(), s);
}

// Step control shared by the transient criteria; criterion 9 refines it.
struct Steps {
    TransientOptions transient;
    SweepOptions sweep;

    Steps halve_dt() const {
        Steps s = *this;
        s.transient.dt_max /= 2;
        s.sweep.dv /= 2;
        return s;
    }
    Steps halve_tolerance() const {
        Steps s = *this;
        s.transient.max_rel_change /= 2;
        s.transient.integrator.max_rel_change /= 2;
        s.sweep.integrator.max_rel_change /= 2;
        return s;
    }
};

using Quantities = std::map<std::string, double>;

// ---------------------------------------------------------------- 1
Quantities switching_quantities(const Steps& st) {
    const ArrayConfig c;
    Quantities q;
    const auto set = apply_write_pulse(0, 0, WritePulse{WriteMode::VoltageSet, 0.75, 1e-3}, c, kFe,
                                       uniform(c, hrs_state(kP)), kP, st.transient);
    q["set.n"] = set.states[0].n_disc;
    q["set.applied"] = set.applied;
    const auto reset = apply_write_pulse(0, 0, WritePulse{WriteMode::VoltageReset, 1.5, 1e-3}, c, kFe,
                                         uniform(c, lrs_state(kP)), kP, st.transient);
    q["reset.n"] = reset.states[0].n_disc;
    q["reset.applied"] = reset.applied;
    for (auto [name, s] : {std::pair{"hrs", hrs_state(kP)}, std::pair{"lrs", lrs_state(kP)}}) {
        StimulusSchedule sch;
        sch.duration = 1e-3;
        sch.events.push_back(single_cell_event(c, 0, 0, CellMode::Read, RowDrive::voltage(0.25, kInf, 0),
                                               0.0, 1e-3, "read"));
        const auto rec = run_transient(sch, c, uniform(c, s), kP, st.transient);
        q[std::string("read.") + name + ".n"] = rec.final_states[0].n_disc;
    }
    return q;
}

Verdict criterion1(const Quantities& q) {
    Verdict v;
    v.check(q.at("set.n") >= 0.99 * kP.n_disc_max, "SET reaches LRS");
    v.check(q.at("reset.applied") == 1.2, "RESET clamped to 1.2 V");
    v.check(q.at("reset.n") <= 1.01 * kP.n_disc_min, "RESET reaches HRS band");
    const double dh = std::abs(q.at("read.hrs.n") - kP.n_disc_min) / kP.n_disc_min;
    const double dl = std::abs(q.at("read.lrs.n") - kP.n_disc_max) / kP.n_disc_max;
    v.check(dh < 0.01 && dl < 0.01, "read disturb < 1%");
    v.note("n_set/n_max=" + fmt("%.5f", q.at("set.n") / kP.n_disc_max) +
           " n_reset/n_min=" + fmt("%.5f", q.at("reset.n") / kP.n_disc_min) +
           " read dn/n=" + fmt("%.2e", std::max(dh, dl)));
    return v;
}

// ---------------------------------------------------------------- 2
struct SweepFacts {
    bool pinched = true;
    double ratio_pos = 0.0, ratio_neg = 0.0;
    double read_ratio = 0.0;
};

SweepFacts sweep_facts(const Steps& st) {
    const std::vector<double> peaks{1.5, -1.0, 0.0};
    const double rate = 0.67;
    const auto s = quasi_static_sweep(0.0, peaks, rate, kP, lrs_state(kP), st.sweep);
    SweepFacts f;
    const double t_pos_end = 3.0 / rate;   // 0 -> 1.5 -> 0
    const double t_neg_turn = 4.0 / rate;  // ... -> -1
    std::map<long, double> up_pos, down_pos, down_neg, up_neg;
    DeviceState after_pos = s.front().state;
    double best = kInf;
    for (const auto& x : s) {
        if (x.v == 0.0 && x.i != 0.0) f.pinched = false;
        if (x.v == 0.0 && std::abs(x.t - t_pos_end) < best) {
            best = std::abs(x.t - t_pos_end);
            after_pos = x.state;
        }
        const long key = std::lround(x.v / st.sweep.dv);
        if (key == 0) continue;
        const bool rising = x.t < 1.5 / rate || x.t > t_neg_turn;
        auto& m = key > 0 ? (rising ? up_pos : down_pos) : (rising ? up_neg : down_neg);
        m[key] = std::abs(x.i);
    }
    auto max_ratio = [](const std::map<long, double>& a, const std::map<long, double>& b) {
        double r = 0.0;
        for (const auto& [k, ia] : a) {
            const auto it = b.find(k);
            if (it == b.end() || ia == 0.0 || it->second == 0.0) continue;
            r = std::max({r, ia / it->second, it->second / ia});
        }
        return r;
    };
    f.ratio_pos = max_ratio(up_pos, down_pos);
    f.ratio_neg = max_ratio(down_neg, up_neg);
    f.read_ratio = conductance_readout(s.back().state, kP) / conductance_readout(after_pos, kP);
    return f;
}

// fraction of the oracle's full-window resistance ratio the sweep must reach
constexpr double kReadRatioFraction = 0.5;

Verdict criterion2(const SweepFacts& f) {
    Verdict v;
    const double oracle = static_cast<double>(testing::reference_read_resistance(kP.n_disc_min, kP) /
                                              testing::reference_read_resistance(kP.n_disc_max, kP));
    const double threshold = kReadRatioFraction * oracle;
    v.check(f.pinched, "I(0) == 0");
    v.check(f.ratio_pos > 10.0, "branch ratio > 10 at positive bias");
    v.check(f.ratio_neg > 10.0, "branch ratio > 10 at negative bias");
    v.check(f.read_ratio > threshold, "read ratio above threshold");
    v.note("branch ratio +" + fmt("%.1f", f.ratio_pos) + " -" + fmt("%.1f", f.ratio_neg) +
           " R_hrs/R_lrs=" + fmt("%.2f", f.read_ratio) + " threshold=" + fmt("%.2f", threshold) +
           " (oracle " + fmt("%.2f", oracle) + ")");
    return v;
}

// ---------------------------------------------------------------- 3
Verdict criterion3() {
    Verdict v;
    const std::vector<double> g{1 / 5e3, 1 / 1.8e3, 1 / 3e3, 1 / 65e3};
    const std::vector<double> vin{0.25, 0.25};
    const double want0 = 0.25 * (g[0] + g[2]), want1 = 0.25 * (g[1] + g[3]);
    const ArrayConfig ideal = ideal_interconnect(2, 2);
    const auto r = vmm(vin, uniform(ideal, hrs_state(kP)), ideal, kFe.adc, kP, {}, g);
    const double e0 = std::abs(r.column_current[0] - want0) / want0;
    const double e1 = std::abs(r.column_current[1] - want1) / want1;
    v.check(e0 < 1e-3 && e1 < 1e-3, "ideal currents within 0.1%");

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> seg(1e-3, 10.0), sw(1e-3, 500.0);
    std::vector<ArrayConfig> parasitic{ArrayConfig{}};
    for (int k = 0; k < 20; ++k) {
        ArrayConfig c;
        c.r_seg_row = seg(rng);
        c.r_seg_col = seg(rng);
        c.r_switch_on = sw(rng);
        parasitic.push_back(c);
    }
    int lower = 0;
    for (const auto& c : parasitic) {
        const auto p = vmm(vin, uniform(c, hrs_state(kP)), c, kFe.adc, kP, {}, g);
        if (p.column_current[0] < r.column_current[0] && p.column_current[1] < r.column_current[1]) ++lower;
    }
    v.check(lower == static_cast<int>(parasitic.size()), "parasitics lower both currents");

    ExperimentConfig fx;
    fx.load_file(std::string(REGMEM_CONFIG_DIR) + "/parasitic_fixture.conf");
    const auto f = vmm(vin, uniform(fx.array, hrs_state(kP)), fx.array, kFe.adc, kP, {}, g);
    const double f0 = f.column_current[0], f1 = f.column_current[1];
    v.check(std::abs(f0 - 129e-6) / 129e-6 < 0.05 && std::abs(f1 - 135e-6) / 135e-6 < 0.05,
            "fixture within 5% of 129/135 uA");
    v.note("ideal " + fmt("%.3f", r.column_current[0] * 1e6) + "/" +
           fmt("%.3f", r.column_current[1] * 1e6) + " uA (analytic " + fmt("%.3f", want0 * 1e6) + "/" +
           fmt("%.3f", want1 * 1e6) + "), " + std::to_string(lower) + "/" +
           std::to_string(parasitic.size()) + " parasitic configs lower, fixture " +
           fmt("%.2f", f0 * 1e6) + "/" + fmt("%.2f", f1 * 1e6) + " uA");
    return v;
}

// ---------------------------------------------------------------- 4
Verdict criterion4() {
    Verdict v;
    std::mt19937_64 rng(2024);
    auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    const CellMode all[] = {CellMode::GroundedBoth, CellMode::VoltageWriteAE, CellMode::VoltageWriteOE,
                            CellMode::CurrentWrite, CellMode::Read, CellMode::HalfSelect};
    double worst = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int trial = 0; trial < 50; ++trial) {
        ArrayConfig c;
        c.n_rows = 2 + static_cast<int>(rng() % 7);
        c.n_cols = 2 + static_cast<int>(rng() % 7);
        c.r_seg_row = uni(0.1, 20.0);
        c.r_seg_col = uni(0.1, 20.0);
        c.r_switch_on = uni(10.0, 500.0);
        c.r_switch_off = uni(1e6, 1e9);
        testing::LinearCrossbar x;
        x.cfg = c;
        DriveSet d = DriveSet::idle(c);
        d.v_adc = uni(0.0, 0.1);
        for (int col = 0; col < c.n_cols; ++col) d.cols[col] = static_cast<ColumnTermination>(rng() % 3);
        x.rows.resize(c.n_rows);
        for (int r = 0; r < c.n_rows; ++r) {
            const int kind = static_cast<int>(rng() % 3);
            for (int col = 0; col < c.n_cols; ++col) {
                CellMode m;
                do {
                    m = all[rng() % 6];
                } while ((kind == 1 && m == CellMode::CurrentWrite) ||
                         (kind == 2 && (m == CellMode::VoltageWriteAE || m == CellMode::VoltageWriteOE)));
                x.modes.push_back(m);
                x.g_cell.push_back(uni(1e-6, 1e-3));
            }
            if (kind == 1) {
                d.rows[r] = RowDrive::voltage(uni(-1.5, 1.5));
                x.rows[r] = {testing::LinearCrossbar::Row::Voltage, d.rows[r].value};
            } else if (kind == 2) {
                d.rows[r] = RowDrive::current(uni(-100e-6, 100e-6));
                x.rows[r] = {testing::LinearCrossbar::Row::Current, d.rows[r].value};
            }
        }
        for (int col = 0; col < c.n_cols; ++col) {
            const auto t = d.cols[col];
            x.col_v.push_back(t == ColumnTermination::Ground ? 0.0
                              : t == ColumnTermination::Adc  ? d.v_adc
                                                             : d.v_dd);
        }
        const auto net = build_network(c, x.modes, d, uniform(c, hrs_state(kP)), x.g_cell);
        const auto op = solve_operating_point(net, kP);
        const auto ref = testing::dense_solve(x);
        double scale = 0.0;
        for (const auto& [k, val] : ref) scale = std::max(scale, std::abs(val));
        for (const auto& nv : node_table(net, op))
            worst = std::max(worst, std::abs(nv.value - ref.at(nv.name)) / scale);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.check(worst <= 1e-9, "node voltages within 1e-9 of the dense solve");
    v.check(secs < 60.0, "runtime < 60 s");
    v.note("50 networks, worst |dV|/max|V|=" + fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s");
    return v;
}

// ---------------------------------------------------------------- 5
Verdict criterion5() {
    Verdict v;
    const std::vector<WritePulse> writes{{WriteMode::VoltageSet, 0.75, 1e-3},
                                         {WriteMode::VoltageReset, 1.5, 1e-3},
                                         {WriteMode::CurrentSet, 20e-6, 1e-3}};
    auto worst_unselected = [&](const ArrayConfig& c) {
        double worst = 0.0;
        for (int r = 0; r < c.n_rows; ++r) {
            for (int col = 0; col < c.n_cols; ++col) {
                auto states = uniform(c, DeviceState{1.0});
                for (const auto& w : writes) {
                    const auto out = apply_write_pulse(r, col, w, c, kFe, states, kP);
                    for (const auto& i : out.record.device_i) {
                        for (int k = 0; k < c.cells(); ++k) {
                            if (k != c.index(r, col)) worst = std::max(worst, std::abs(i[k]));
                        }
                    }
                    states = out.states;
                }
            }
        }
        return worst;
    };
    const double ideal = worst_unselected(ideal_interconnect(2, 2));
    const double real = worst_unselected(ArrayConfig{});
    v.check(ideal == 0.0, "ideal switches: unselected current exactly 0");
    v.check(real < 1e-9, "100 ohm switches: unselected current < 1 nA");

    // 1T1R-style half select: the neighbour on the driven row stays on the lines
    const ArrayConfig c;
    std::vector<CellMode> m(4, CellMode::GroundedBoth);
    m[c.index(0, 0)] = CellMode::VoltageWriteAE;
    m[c.index(0, 1)] = CellMode::HalfSelect;
    m[c.index(1, 0)] = CellMode::HalfSelect;
    DriveSet d = DriveSet::idle(c);
    d.rows[0] = RowDrive::voltage(1.2);
    d.rows[1] = RowDrive::voltage(0.6);
    const auto net = build_network(c, m, d, uniform(c, lrs_state(kP)));
    const auto rep = sneak_current_report(net, solve_operating_point(net, kP));
    int flagged = 0;
    double sneak = 0.0;
    for (const auto& e : rep) {
        if (net.modes[net.cfg.index(e.row, e.col)] != CellMode::HalfSelect) continue;
        if (e.flagged && e.current > 0.0) ++flagged;
        sneak = std::max(sneak, e.current);
    }
    v.check(flagged == 2, "half-selected cells reported with nonzero current");
    v.note("max unselected |I| ideal=" + fmt("%.3g", ideal) + " A, default=" + fmt("%.3g", real) +
           " A; half-select sneak up to " + fmt("%.3g", sneak) + " A");
    return v;
}

// ---------------------------------------------------------------- 6
Verdict criterion6() {
    Verdict v;
    const ArrayConfig c = ideal_interconnect(2, 2);
    auto states = uniform(c, hrs_state(kP));
    const auto range = achievable_range(0, 0, c, kFe, states, kP);
    const double span = range.g_lrs - range.g_hrs;
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> frac(0.1, 0.9);
    std::uniform_int_distribution<int> cell(0, c.cells() - 1);

    int ok = 0, confirmed = 0, pulses = 0;
    double drift = 0.0;
    for (int k = 0; k < 20; ++k) {
        ProgramTarget t;
        const int idx = cell(rng);
        t.row = idx / c.n_cols;
        t.col = idx % c.n_cols;
        t.g_target = range.g_hrs + frac(rng) * span;
        const auto before = states;
        const ProgramReport rep = read_verify_program(t, states, c, kFe, kP);
        pulses += rep.pulses;
        for (int j = 0; j < c.cells(); ++j) {
            if (j == idx) continue;
            drift = std::max(drift, std::abs(states[j].n_disc - before[j].n_disc) / before[j].n_disc);
        }
        if (!rep.success) continue;
        ++ok;
        // independent re-read straight from the device model
        const double g = conductance_readout(states[idx], kP);
        if (g >= t.g_low() && g <= t.g_high()) ++confirmed;
    }
    v.check(ok >= 19, ">= 95% of targets reached");
    v.check(confirmed == ok, "every success confirmed by re-read");
    v.check(drift < 1e-4, "non-target drift < 0.01%");
    v.note(std::to_string(ok) + "/20 reached, " + std::to_string(confirmed) + " confirmed, " +
           std::to_string(pulses) + " pulses total, max non-target drift " + fmt("%.2e", drift));
    return v;
}

// ---------------------------------------------------------------- 7
const std::vector<double> kLevels{3.5e-6, 5e-6, 10e-6, 20e-6};

std::vector<CurrentLevelReport> current_levels(const Steps& st) {
    const ArrayConfig c;
    return current_mode_set(0, 0, kLevels, 10e-3, c, kFe, uniform(c, hrs_state(kP)), kP, st.transient);
}

Verdict criterion7(const std::vector<CurrentLevelReport>& reps) {
    Verdict v;
    bool decreasing = true, monotone = true;
    std::string ts, td, gf;
    for (std::size_t k = 0; k < reps.size(); ++k) {
        monotone = monotone && reps[k].g_monotone;
        if (k > 0 && !(reps[k].t_switch < reps[k - 1].t_switch)) decreasing = false;
        ts += (k ? "," : "") + fmt("%.3g", reps[k].t_switch);
        td += (k ? "," : "") + fmt("%.3g", reps[k].t_double);
        gf += (k ? "," : "") + fmt("%.3g", reps[k].g_final / reps[k].g_initial);
    }
    v.check(decreasing, "time-to-LRS strictly decreasing");
    v.check(monotone, "G(t) non-decreasing");
    v.note("I=3.5,5,10,20 uA: t_LRS=[" + ts + "] s, t_2G=[" + td + "] s, G_end/G_0=[" + gf + "]");
    return v;
}

// ---------------------------------------------------------------- 8
Verdict criterion8() {
    Verdict v;
    const DacSpec& dac = kFe.dac;
    v.check(dac_voltage(0, dac) == 6.25e-3, "DAC code 0");
    v.check(dac_voltage(255, dac) == 1.6, "DAC code 255");
    v.check(regulate_voltage(1.5, kFe.regulator) == 1.2, "regulator clamp");
    bool linear = true;
    for (int code = 0; code <= dac.max_code(); ++code) {
        const double vref = dac_voltage(code, dac);
        if (regulated_current(vref, kFe.isource) != (kFe.isource.v_dd - vref) / kFe.isource.r_conv)
            linear = false;
    }
    v.check(linear, "current source formula");
    const AdcSpec& adc = kFe.adc;
    // error in LSB units against the ramp position, so the bound is exact
    double worst = 0.0;
    const int n = 100000;
    for (int k = 0; k <= n; ++k) {
        const double i = adc.i_full_scale * k / n;
        const double ideal_lsb = static_cast<double>(k) * (1 << adc.bits) / n;
        worst = std::max(worst, std::abs(adc_read(i, adc).code - ideal_lsb));
    }
    v.check(worst <= 1.0, "ADC error <= 1 LSB");
    v.note("ADC worst error " + fmt("%.3f", worst) + " LSB over " + std::to_string(n + 1) +
           " ramp points");
    return v;
}

// ---------------------------------------------------------------- 9
Quantities transient_quantities(const Steps& st) {
    Quantities q = switching_quantities(st);
    q["sweep.read_ratio"] = sweep_facts(st).read_ratio;
    const auto reps = current_levels(st);
    for (std::size_t k = 0; k < reps.size(); ++k) {
        q["iset." + fmt("%.1f", kLevels[k] * 1e6) + "uA.g_final"] = reps[k].g_final;
    }
    return q;
}

Verdict criterion9(const Quantities& base, const Steps& st) {
    Verdict v;
    double worst = 0.0;
    std::string worst_name;
    for (const auto& [label, refined] :
         {std::pair{"dt", st.halve_dt()}, std::pair{"tol", st.halve_tolerance()}}) {
        const Quantities q = transient_quantities(refined);
        for (const auto& [name, x] : base) {
            const double y = q.at(name);
            const double rel = x == y ? 0.0 : std::abs(y - x) / std::max(std::abs(x), std::abs(y));
            if (rel > worst) {
                worst = rel;
                worst_name = std::string(label) + ":" + name;
            }
        }
    }
    v.check(worst < 1e-3, "every quantity moves < 0.1%");
    v.note(std::to_string(base.size()) + " quantities, worst change " + fmt("%.2e", worst) +
           (worst_name.empty() ? "" : " (" + worst_name + ")"));
    return v;
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const std::function<Verdict()>& f) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = f();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!v.pass) ++failures;
        std::printf("%s criterion %d: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", id, v.detail.c_str(), secs);
        std::fflush(stdout);
    };

    const Steps steps;
    Quantities base;
    report(1, [&] {
        const auto q = switching_quantities(steps);
        base.insert(q.begin(), q.end());
        return criterion1(q);
    });
    report(2, [&] {
        const auto f = sweep_facts(steps);
        base["sweep.read_ratio"] = f.read_ratio;
        return criterion2(f);
    });
    report(3, criterion3);
    report(4, criterion4);
    report(5, criterion5);
    report(6, criterion6);
    report(7, [&] {
        const auto reps = current_levels(steps);
        for (std::size_t k = 0; k < reps.size(); ++k)
            base["iset." + fmt("%.1f", kLevels[k] * 1e6) + "uA.g_final"] = reps[k].g_final;
        return criterion7(reps);
    });
    report(8, criterion8);
    report(9, [&] { return criterion9(base, steps); });
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
