#pragma once

// Deterministic compact model of a filamentary VCM memristor (JART VCM v1b
// structure): Schottky contact at the active electrode in series with a
// disc region of variable oxygen-vacancy concentration, a fixed plug region,
// the TiOx layer resistance and a self-heating line resistance.
//
// Units: SI throughout, except vacancy concentrations which are expressed in
// 1e26 m^-3 and energies given in eV.

#include <span>
#include <vector>

namespace regmem {

struct DeviceParams {
    // Deterministic parameter table values.
    double a_det = 6.36e-15;       ///< disc cross-section area, m^2
    double n_disc_min = 0.00826;   ///< HRS boundary concentration, 1e26 m^-3
    double l_cell = 3e-9;          ///< oxide cell length, m
    double l_plug = 2.6e-9;        ///< plug length, m
    double r_series = 1.37e3;      ///< nominal series resistance (r_line + r_tiox), Ohm
    double r_line = 719.0;         ///< line resistance at ambient, Ohm
    double r_tiox = 650.0;         ///< TiOx layer resistance, Ohm
    double gamma0 = 2e13;          ///< ion attempt frequency, Hz
    double rth0_set = 15.72e6;     ///< thermal resistance of the switching region, K/W
    double e_phi_bn0 = 0.18;       ///< zero-bias Schottky barrier height, eV
    double rth_line = 90471.47;    ///< line thermal resistance, K/W
    double alpha_line = 3.92e-3;   ///< line temperature coefficient, 1/K
    double a_star = 6.01e5;        ///< effective Richardson constant, A/(m^2 K^2)
    double kb = 1.38e-23;          ///< Boltzmann constant, J/K
    double rd = 45e-9;             ///< filament radius, m
    double a_hop = 0.25e-9;        ///< ion hopping distance, m
    double l_det = 0.4e-9;         ///< disc length, m
    double t0 = 293.0;             ///< ambient temperature, K

    // Closure constants; defaults follow the public v1b parameterization.
    double n_disc_max = 20.0;      ///< LRS boundary concentration, 1e26 m^-3
    double delta_e_a = 1.35;       ///< ion hopping activation energy, eV
    double n_plug = 20.0;          ///< plug concentration, 1e26 m^-3
    double mobility = 4e-6;        ///< electron mobility, m^2/(V s)
    double eps_r = 17.0;           ///< static relative permittivity
    double eps_phib = 5.5;         ///< permittivity for image-force lowering
    double phi_n = 0.1;            ///< conduction band to Fermi level offset, eV
    double z_vo = 2.0;             ///< oxygen vacancy charge number
    double m_eff = 1.0;            ///< tunnelling effective mass, units of m0
    double window_exp = 10.0;      ///< exponent of the boundary window function

    /// Throws ConfigError naming the first violated invariant.
    void validate() const;
};

/// The single dynamic variable of a device.
struct DeviceState {
    double n_disc = 0.0;  ///< disc vacancy concentration, 1e26 m^-3

    friend bool operator==(const DeviceState&, const DeviceState&) = default;
};

/// v_device = V(AE) - V(OE). Positive drives RESET, negative drives SET.
enum class Terminal { ActiveElectrode, OhmicElectrode };

inline DeviceState hrs_state(const DeviceParams& p) { return {p.n_disc_min}; }
inline DeviceState lrs_state(const DeviceParams& p) { return {p.n_disc_max}; }

/// Voltage division across the series stack at one bias point.
struct StackSolution {
    double current = 0.0;     ///< A, positive flows AE -> OE
    double v_schottky = 0.0;
    double v_disc = 0.0;
    double v_plug = 0.0;
    double v_tiox = 0.0;
    double v_line = 0.0;
    int iterations = 0;
};

/// Solves the series stack for the bias `v_device`. Throws NonConvergence if
/// the internal division does not reach 1e-10 relative in 100 iterations.
StackSolution solve_stack(double v_device, DeviceState state, const DeviceParams& p);

/// Total device current for the given bias (A).
double device_current(double v_device, DeviceState state, const DeviceParams& p);

/// Local temperature of the switching region for a solved bias point (K).
double local_temperature(const StackSolution& s, const DeviceParams& p);

/// d(n_disc)/dt in 1e26 m^-3 per second.
double state_derivative(double v_device, DeviceState state, const DeviceParams& p);

struct IntegratorOptions {
    double max_rel_change = 1e-3;  ///< per sub-step bound on |dn|/n
    /// Smallest sub-step is dt / 2^max_halvings. Runaway switching near
    /// 1.2 V needs sub-steps around 1e-17 s, so the floor sits far below dt.
    int max_halvings = 64;
};

/// Advances the state over `dt` with the bias held constant.
/// Throws StepTooLarge when the smallest allowed sub-step still violates the
/// error control.
DeviceState integrate_step(DeviceState state, double v_device, double dt,
                           const DeviceParams& p, const IntegratorOptions& opt = {});

struct SweepSample {
    double t = 0.0;
    double v = 0.0;
    double i = 0.0;
    DeviceState state;
};

struct SweepOptions {
    double dv = 1e-3;  ///< voltage spacing of the emitted samples
    IntegratorOptions integrator;
};

/// Triangular voltage sweep from `v_start` through each of `v_peaks` in turn
/// at constant |dV/dt| = `rate`, alternating state integration and current
/// evaluation.
std::vector<SweepSample> quasi_static_sweep(double v_start, std::span<const double> v_peaks,
                                            double rate, const DeviceParams& p,
                                            DeviceState initial, const SweepOptions& opt = {});

inline constexpr double kMaxReadVoltage = 0.25;

/// Secant conductance I(v_read)/v_read. Throws ReadVoltageOutOfRange outside
/// (0, 0.25] V.
double conductance_readout(DeviceState state, const DeviceParams& p, double v_read = 0.25);

}  // namespace regmem
