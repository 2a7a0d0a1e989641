#include "regmem/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "regmem/errors.hpp"

namespace regmem {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int parse_int(const std::string& s, const std::string& where) {
    int v = 0;
    const auto t = trim(s);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError(where + "'" + s + "' is not an integer");
    return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& where) {
    std::uint64_t v = 0;
    const auto t = trim(s);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError(where + "'" + s + "' is not an unsigned integer");
    return v;
}

bool parse_bool(const std::string& s, const std::string& where) {
    const auto t = trim(s);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError(where + "'" + s + "' is not a boolean");
}

std::vector<double> parse_list(const std::string& s, const std::string& where) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(item, where));
    if (out.empty()) throw ConfigError(where + "empty list");
    return out;
}

std::string format_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += format_double(v[i]);
    }
    return s;
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    if (x == 0.0) x = 0.0;  // no "-0" in output
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

double parse_double(const std::string& s, const std::string& where) {
    const auto t = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError(where + "'" + s + "' is not a number");
    return v;
}

std::map<std::string, ExperimentConfig::Binding> ExperimentConfig::table() const {
    auto* self = const_cast<ExperimentConfig*>(this);
    std::map<std::string, Binding> m;
    auto num = [&m](const std::string& key, double* field) {
        m[key] = {[field, key](const std::string& v) { *field = parse_double(v, key + ": "); },
                  [field] { return format_double(*field); }};
    };
    auto integer = [&m](const std::string& key, int* field) {
        m[key] = {[field, key](const std::string& v) { *field = parse_int(v, key + ": "); },
                  [field] { return std::to_string(*field); }};
    };
    auto flag = [&m](const std::string& key, bool* field) {
        m[key] = {[field, key](const std::string& v) { *field = parse_bool(v, key + ": "); },
                  [field] { return std::string(*field ? "true" : "false"); }};
    };
    auto text = [&m](const std::string& key, std::string* field) {
        m[key] = {[field](const std::string& v) { *field = trim(v); }, [field] { return *field; }};
    };
    auto list = [&m](const std::string& key, std::vector<double>* field) {
        m[key] = {[field, key](const std::string& v) { *field = parse_list(v, key + ": "); },
                  [field] { return format_list(*field); }};
    };

    DeviceParams& d = self->device;
    num("a_det", &d.a_det);
    num("n_disc_min", &d.n_disc_min);
    num("l_cell", &d.l_cell);
    num("l_plug", &d.l_plug);
    num("l_det", &d.l_det);
    num("r_series", &d.r_series);
    num("r_line", &d.r_line);
    num("r_tiox", &d.r_tiox);
    num("gamma0", &d.gamma0);
    num("rth0_set", &d.rth0_set);
    num("e_phi_bn0", &d.e_phi_bn0);
    num("rth_line", &d.rth_line);
    num("alpha_line", &d.alpha_line);
    num("a_star", &d.a_star);
    num("kb", &d.kb);
    num("rd", &d.rd);
    num("a_hop", &d.a_hop);
    num("t0", &d.t0);
    num("n_disc_max", &d.n_disc_max);
    num("delta_e_a", &d.delta_e_a);
    num("n_plug", &d.n_plug);
    num("mobility", &d.mobility);
    num("eps_r", &d.eps_r);
    num("eps_phib", &d.eps_phib);
    num("phi_n", &d.phi_n);
    num("z_vo", &d.z_vo);
    num("m_eff", &d.m_eff);
    num("window_exp", &d.window_exp);

    FrontEnd& fe = self->fe;
    integer("dac.bits", &fe.dac.bits);
    num("dac.lsb", &fe.dac.lsb);
    num("dac.v_min", &fe.dac.v_min);
    num("dac.v_max", &fe.dac.v_max);
    num("regulator.v_in_min", &fe.regulator.v_in_min);
    num("regulator.v_in_max", &fe.regulator.v_in_max);
    num("regulator.v_dropout_max", &fe.regulator.v_dropout_max);
    num("regulator.i_compliance", &fe.regulator.i_compliance);
    num("isource.v_dd", &fe.isource.v_dd);
    num("isource.r_conv", &fe.isource.r_conv);
    integer("adc.bits", &fe.adc.bits);
    num("adc.i_full_scale", &fe.adc.i_full_scale);
    num("adc.v_read_reg", &fe.adc.v_read_reg);
    num("adc.v_read_default", &fe.adc.v_read_default);
    num("adc.v_read_safe", &fe.adc.v_read_safe);

    ArrayConfig& a = self->array;
    integer("array.n_rows", &a.n_rows);
    integer("array.n_cols", &a.n_cols);
    num("array.r_seg_row", &a.r_seg_row);
    num("array.r_seg_col", &a.r_seg_col);
    num("array.r_switch_on", &a.r_switch_on);
    num("array.r_switch_off", &a.r_switch_off);
    flag("array.ideal_switches", &a.ideal_switches);
    text("array.initial", &self->initial_state);

    SolverOptions& so = self->solver;
    num("solver.fd_step", &so.fd_step);
    integer("solver.max_iterations", &so.max_iterations);
    num("solver.residual_tol", &so.residual_tol);
    num("solver.residual_floor", &so.residual_floor);
    num("solver.dv_tol", &so.dv_tol);
    num("solver.max_step", &so.max_step);
    integer("solver.source_steps", &so.source_steps);

    num("integrator.max_rel_change", &self->integrator.max_rel_change);
    integer("integrator.max_halvings", &self->integrator.max_halvings);
    num("transient.dt_max", &self->dt_max);
    num("transient.max_rel_change", &self->max_rel_change);

    SweepSettings& sw = self->sweep;
    num("sweep.v_start", &sw.v_start);
    list("sweep.peaks", &sw.peaks);
    num("sweep.rate", &sw.rate);
    num("sweep.dv", &sw.dv);
    text("sweep.initial", &sw.initial);

    PulseSettings& pu = self->pulse;
    text("pulse.sequence", &pu.sequence);
    integer("pulse.row", &pu.row);
    integer("pulse.col", &pu.col);
    num("pulse.width", &pu.width);
    num("pulse.gap", &pu.gap);
    num("pulse.set_amplitude", &pu.set_amplitude);
    num("pulse.reset_amplitude", &pu.reset_amplitude);

    ProgramSettings& pr = self->program;
    m["program.policy"] = {
        [&pr](const std::string& v) {
            const auto t = trim(v);
            if (t == "compliance_bisection") pr.policy = VerifyPolicy::ComplianceBisection;
            else if (t == "width_halving") pr.policy = VerifyPolicy::WidthHalving;
            else throw ConfigError("program.policy: '" + v + "' (compliance_bisection|width_halving)");
        },
        [&pr] { return std::string(to_string(pr.policy)); }};
    m["program.mode"] = {
        [&pr](const std::string& v) {
            const auto t = trim(v);
            if (t == "voltage") pr.mode = ProgramMode::VoltageMode;
            else if (t == "current") pr.mode = ProgramMode::CurrentMode;
            else throw ConfigError("program.mode: '" + v + "' (voltage|current)");
        },
        [&pr] { return std::string(pr.mode == ProgramMode::VoltageMode ? "voltage" : "current"); }};
    num("program.tolerance", &pr.tolerance);
    integer("program.max_pulses", &pr.max_pulses);
    num("program.i_cc_min", &pr.i_cc_min);
    num("program.min_width", &pr.min_width);
    num("program.w_min", &pr.w_min);
    num("program.w_max", &pr.w_max);
    num("program.g_min", &pr.g_min);
    num("program.g_max", &pr.g_max);

    DriveSettings& dr = self->drive;
    list("drive.v", &dr.v);
    num("drive.width", &dr.width);
    num("drive.period", &dr.period);
    integer("drive.periods", &dr.periods);
    m["drive.column"] = {
        [&dr](const std::string& v) {
            const auto t = trim(v);
            if (t == "adc") dr.column = ColumnTermination::Adc;
            else if (t == "ground") dr.column = ColumnTermination::Ground;
            else if (t == "vdd") dr.column = ColumnTermination::Vdd;
            else throw ConfigError("drive.column: '" + v + "' (adc|ground|vdd)");
        },
        [&dr] {
            return std::string(dr.column == ColumnTermination::Adc      ? "adc"
                               : dr.column == ColumnTermination::Ground ? "ground"
                                                                        : "vdd");
        }};

    std::uint64_t* seed = &self->seed;
    m["seed"] = {[seed](const std::string& v) { *seed = parse_u64(v, "seed: "); },
                 [seed] { return std::to_string(*seed); }};
    return m;
}

void ExperimentConfig::set(const std::string& key, const std::string& value,
                           const std::string& where) {
    auto t = table();
    const auto it = t.find(trim(key));
    const std::string prefix = where.empty() ? "" : where + ": ";
    if (it == t.end()) throw ConfigError(prefix + "unknown key '" + trim(key) + "'");
    try {
        it->second.set(value);
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    }
}

void ExperimentConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'name = value'");
        set(line.substr(0, eq), line.substr(eq + 1), where);
    }
}

void ExperimentConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set '" + assignment + "': expected key=value");
    set(assignment.substr(0, eq), assignment.substr(eq + 1), "--set " + trim(assignment.substr(0, eq)));
}

std::vector<std::string> ExperimentConfig::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, b] : table()) out.push_back(k);
    return out;
}

std::string ExperimentConfig::get(const std::string& key) const {
    const auto t = table();
    const auto it = t.find(key);
    if (it == t.end()) throw ConfigError("unknown key '" + key + "'");
    return it->second.get();
}

std::string ExperimentConfig::canonical() const {
    std::string out;
    for (const auto& [k, b] : table()) out += k + " = " + b.get() + "\n";
    return out;
}

std::uint64_t ExperimentConfig::hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void ExperimentConfig::validate() const {
    device.validate();
    fe.validate();
    array.validate();
    if (!(dt_max > 0.0)) throw ConfigError("transient.dt_max must be > 0");
    if (!(max_rel_change > 0.0 && max_rel_change < 1.0))
        throw ConfigError("transient.max_rel_change must be in (0, 1)");
    if (!(integrator.max_rel_change > 0.0 && integrator.max_rel_change < 1.0))
        throw ConfigError("integrator.max_rel_change must be in (0, 1)");
    if (integrator.max_halvings < 1 || integrator.max_halvings > 200)
        throw ConfigError("integrator.max_halvings must be in [1, 200]");
    if (solver.max_iterations < 1 || solver.source_steps < 1 || !(solver.fd_step > 0.0))
        throw ConfigError("solver settings must be positive");
    if (!(sweep.rate > 0.0)) throw ConfigError("sweep.rate must be > 0");
    if (!(sweep.dv > 0.0)) throw ConfigError("sweep.dv must be > 0");
    if (!(pulse.width > 0.0) || !(pulse.gap >= 0.0)) throw ConfigError("pulse.width/gap invalid");
    if (!(program.tolerance > 0.0 && program.tolerance < 1.0))
        throw ConfigError("program.tolerance must be in (0, 1)");
    if (program.max_pulses < 0) throw ConfigError("program.max_pulses must be >= 0");
    if (!(drive.width > 0.0 && drive.width <= drive.period) || drive.periods < 1)
        throw ConfigError("drive pulse needs 0 < width <= period and periods >= 1");
    (void)initial_states();
}

TransientOptions ExperimentConfig::transient_options() const {
    TransientOptions o;
    o.dt_max = dt_max;
    o.max_rel_change = max_rel_change;
    o.integrator = integrator;
    o.solver = solver;
    return o;
}

VerifyOptions ExperimentConfig::verify_options() const {
    VerifyOptions o;
    o.policy = program.policy;
    o.set_amplitude = pulse.set_amplitude;
    o.reset_amplitude = pulse.reset_amplitude;
    o.width = pulse.width;
    o.min_width = program.min_width;
    o.i_cc_min = program.i_cc_min;
    o.transient = transient_options();
    return o;
}

std::vector<DeviceState> ExperimentConfig::initial_states() const {
    double n = 0.0;
    if (initial_state == "hrs") n = device.n_disc_min;
    else if (initial_state == "lrs") n = device.n_disc_max;
    else n = parse_double(initial_state, "array.initial: ");
    if (!(n >= device.n_disc_min && n <= device.n_disc_max))
        throw ConfigError("array.initial outside [n_disc_min, n_disc_max]");
    return std::vector<DeviceState>(array.cells(), DeviceState{n});
}

}  // namespace regmem
