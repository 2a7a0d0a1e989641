#include "regmem/analog_frontend.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "regmem/errors.hpp"

namespace regmem {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

}  // namespace

void DacSpec::validate() const {
    require(bits >= 1 && bits <= 16, "dac.bits must be in [1, 16]");
    require(lsb > 0.0, "dac.lsb must be > 0");
    require(std::abs(v_min - lsb) <= 1e-12 * lsb, "dac.v_min must equal dac.lsb");
    require(std::abs(std::ldexp(lsb, bits) - v_max) <= 1e-12 * v_max,
            "dac.v_max must equal 2^bits * lsb");
}

void RegulatorSpec::validate() const {
    require(v_in_min < v_dropout_max && v_dropout_max < v_in_max,
            "regulator: need v_in_min < v_dropout_max < v_in_max");
    require(i_compliance > 0.0, "regulator.i_compliance must be > 0");
}

void CurrentSourceSpec::validate() const {
    require(v_dd > 0.0, "isource.v_dd must be > 0");
    require(r_conv > 0.0, "isource.r_conv must be > 0");
}

void PulseSpec::validate(const DacSpec& dac) const {
    if (amplitude_code < 0 || amplitude_code > dac.max_code())
        throw CodeOutOfRange("pulse amplitude code " + std::to_string(amplitude_code));
    if (!(width > 0.0 && width <= period))
        throw InvalidArgument("pulse needs 0 < width <= period");
}

double AdcSpec::lsb() const { return std::ldexp(i_full_scale, -bits); }

void AdcSpec::validate() const {
    require(bits >= 1 && bits <= 24, "adc.bits must be in [1, 24]");
    require(i_full_scale > 0.0, "adc.i_full_scale must be > 0");
    require(v_read_reg > 0.0 && v_read_reg <= 0.7, "adc.v_read_reg must be in (0, 0.7]");
    require(v_read_safe > 0.0 && v_read_safe <= v_read_reg,
            "adc.v_read_safe must be in (0, adc.v_read_reg]");
    require(v_read_default > 0.0 && v_read_default <= v_read_safe,
            "adc.v_read_default must be in (0, adc.v_read_safe]");
}

double dac_voltage(int code, const DacSpec& spec) {
    if (code < 0 || code > spec.max_code())
        throw CodeOutOfRange("DAC code " + std::to_string(code) + " outside [0, " +
                             std::to_string(spec.max_code()) + "]");
    return (code + 1) * spec.lsb;
}

DacLevel quantize_to_dac(double v_target, const DacSpec& spec) {
    if (!(v_target >= spec.v_min && v_target <= spec.v_max))
        throw TargetOutOfRange("DAC target " + fmt(v_target) + " V outside [" + fmt(spec.v_min) +
                               ", " + fmt(spec.v_max) + "] V");
    int code = static_cast<int>(std::floor(v_target / spec.lsb)) - 1;
    if (code < 0) code = 0;
    if (code > spec.max_code()) code = spec.max_code();
    DacLevel best{code, dac_voltage(code, spec)};
    // the floor estimate is within one code of the answer either way
    for (int c : {code - 1, code + 1}) {
        if (c < 0 || c > spec.max_code()) continue;
        const double v = dac_voltage(c, spec);
        const double d = std::abs(v - v_target);
        const double d_best = std::abs(best.volts - v_target);
        if (d < d_best || (d == d_best && c < best.code)) best = {c, v};
    }
    return best;
}

double regulate_voltage(double v_ref, const RegulatorSpec& spec) {
    if (!(v_ref >= spec.v_in_min && v_ref <= spec.v_in_max))
        throw RefOutOfOpampRange("regulator reference " + fmt(v_ref) + " V outside [" +
                                 fmt(spec.v_in_min) + ", " + fmt(spec.v_in_max) + "] V");
    return v_ref < spec.v_dropout_max ? v_ref : spec.v_dropout_max;
}

double regulated_current(double v_ref, const CurrentSourceSpec& spec) {
    if (v_ref > spec.v_dd)
        throw RefAboveSupply("current reference " + fmt(v_ref) + " V above supply " +
                             fmt(spec.v_dd) + " V");
    if (!(v_ref > 0.0)) throw InvalidArgument("current reference must be > 0 V");
    return (spec.v_dd - v_ref) / spec.r_conv;
}

CurrentLevel quantize_current(double i_target, const DacSpec& dac, const CurrentSourceSpec& cs) {
    if (!(i_target >= 0.0)) throw TargetOutOfRange("current target must be >= 0");
    const double v_needed = cs.v_dd - i_target * cs.r_conv;
    const DacLevel lv = quantize_to_dac(v_needed, dac);
    return {lv.code, lv.volts, regulated_current(lv.volts, cs)};
}

std::vector<Segment> pwm_waveform(const PulseSpec& pulse, int n_periods, const DacSpec& dac) {
    pulse.validate(dac);
    if (n_periods < 1) throw InvalidArgument("pwm needs at least one period");
    const double amp = dac_voltage(pulse.amplitude_code, dac);
    std::vector<Segment> out;
    auto push = [&out](double a, double b, double v) {
        if (!(b > a)) return;
        if (!out.empty() && out.back().volts == v && out.back().t_end == a) {
            out.back().t_end = b;
        } else {
            out.push_back({a, b, v});
        }
    };
    for (int k = 0; k < n_periods; ++k) {
        const double t0 = k * pulse.period;
        const double t1 = (k + 1) * pulse.period;
        const double edge = pulse.width == pulse.period ? t1 : t0 + pulse.width;
        push(t0, edge, amp);
        push(edge, t1, 0.0);
    }
    return out;
}

double waveform_integral(const std::vector<Segment>& w) {
    double s = 0.0;
    for (const auto& seg : w) s += (seg.t_end - seg.t_start) * seg.volts;
    return s;
}

AdcReading adc_read(double i_column, const AdcSpec& spec) {
    if (i_column < 0.0)
        throw NegativeCurrent("column current " + fmt(i_column) +
                              " A is negative; the read path only sources current");
    const double lsb = spec.lsb();
    int code = 0;
    for (int b = spec.bits - 1; b >= 0; --b) {
        const int trial = code | (1 << b);
        // comparator: keep the bit if the DAC reference does not exceed the input
        if (trial * lsb <= i_column * (1.0 + 1e-12)) code = trial;
    }
    return {code, code * lsb};
}

}  // namespace regmem
