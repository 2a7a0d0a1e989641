#pragma once

// Behavioral models of the array periphery: R-2R DAC, regulated voltage
// source, regulated current source, PWM generator and current-mode SAR ADC.

#include <vector>

#include "regmem/device_model.hpp"

namespace regmem {

struct DacSpec {
    int bits = 8;
    double lsb = 6.25e-3;   ///< V
    double v_min = 6.25e-3; ///< V, output of code 0
    double v_max = 1.6;     ///< V, output of the top code

    int max_code() const { return (1 << bits) - 1; }
    void validate() const;
};

struct RegulatorSpec {
    double v_in_min = 0.2;         ///< opamp input range, V
    double v_in_max = 1.6;
    double v_dropout_max = 1.2;    ///< largest output the pass device can regulate, V
    double i_compliance = 500e-6;  ///< pass-transistor current limit, A

    void validate() const;
};

struct CurrentSourceSpec {
    double v_dd = 1.8;      ///< V
    double r_conv = 75e3;   ///< voltage-to-current conversion resistor, Ohm

    void validate() const;
};

struct PulseSpec {
    int amplitude_code = 0;
    double width = 1e-3;    ///< s
    double period = 1e-3;   ///< s
    Terminal polarity_terminal = Terminal::ActiveElectrode;

    void validate(const DacSpec& dac) const;
};

struct AdcSpec {
    int bits = 8;
    double i_full_scale = 256e-6;  ///< A
    double v_read_reg = 0.7;       ///< highest regulated read voltage, V
    double v_read_default = 0.25;  ///< read voltage used by verify and VMM, V
    double v_read_safe = 0.25;     ///< non-destructive read limit, V

    int max_code() const { return (1 << bits) - 1; }
    double lsb() const;
    void validate() const;
};

/// The complete periphery configuration.
struct FrontEnd {
    DacSpec dac;
    RegulatorSpec regulator;
    CurrentSourceSpec isource;
    AdcSpec adc;

    void validate() const {
        dac.validate();
        regulator.validate();
        isource.validate();
        adc.validate();
    }
};

/// (code + 1) * lsb. Throws CodeOutOfRange.
double dac_voltage(int code, const DacSpec& spec);

struct DacLevel {
    int code = 0;
    double volts = 0.0;
};

/// Nearest DAC level, ties toward the lower code. Throws TargetOutOfRange.
DacLevel quantize_to_dac(double v_target, const DacSpec& spec);

/// Ideal regulation below dropout: min(v_ref, v_dropout_max).
/// Throws RefOutOfOpampRange outside [v_in_min, v_in_max].
double regulate_voltage(double v_ref, const RegulatorSpec& spec);

/// (v_dd - v_ref) / r_conv. Throws RefAboveSupply if v_ref > v_dd.
double regulated_current(double v_ref, const CurrentSourceSpec& spec);

struct CurrentLevel {
    int code = 0;
    double v_ref = 0.0;
    double amperes = 0.0;
};

/// DAC reference whose regulated current is nearest to `i_target`.
/// Throws TargetOutOfRange if the required reference is outside the DAC span.
CurrentLevel quantize_current(double i_target, const DacSpec& dac, const CurrentSourceSpec& cs);

/// One constant piece of a waveform on [t_start, t_end).
struct Segment {
    double t_start = 0.0;
    double t_end = 0.0;
    double volts = 0.0;
};

/// Pulse train: amplitude for `width`, 0 V for the rest of each period.
/// Adjacent pieces with equal level are merged; edges are k * period exactly.
std::vector<Segment> pwm_waveform(const PulseSpec& pulse, int n_periods, const DacSpec& dac);

/// Exact integral of a piecewise-constant waveform, V s.
double waveform_integral(const std::vector<Segment>& w);

struct AdcReading {
    int code = 0;
    double i_quantized = 0.0;
};

/// Successive-approximation conversion of a sourced column current.
/// Saturates at the top code. Throws NegativeCurrent for i_column < 0.
AdcReading adc_read(double i_column, const AdcSpec& spec);

}  // namespace regmem
