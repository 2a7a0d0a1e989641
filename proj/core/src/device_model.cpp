#include "regmem/device_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "regmem/errors.hpp"

namespace regmem {

namespace {

constexpr double kQ = 1.602176634e-19;
constexpr double kHbar = 1.054571817e-34;
constexpr double kEps0 = 8.8541878128e-12;
constexpr double kElectronMass = 9.1093837015e-31;
constexpr double kPi = 3.14159265358979323846;
constexpr double kConcUnit = 1e26;

void require(bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("device parameter invariant violated: ") + what);
}

// Barrier height after image-force lowering, in eV.
double effective_barrier(double n_disc, const DeviceParams& p) {
    const double n = n_disc * kConcUnit;
    const double eps = p.eps_phib * kEps0;
    const double arg = kQ * kQ * kQ * p.z_vo * n * (p.e_phi_bn0 - p.phi_n) /
                       (8.0 * kPi * kPi * eps * eps * eps);
    const double lowering = arg > 0.0 ? std::pow(arg, 0.25) : 0.0;
    return std::max(p.e_phi_bn0 - lowering, 0.0);
}

// Voltage-independent part of the contact current for one state.
struct Contact {
    double kt = 0.0;        // J
    double i_sat = 0.0;     // thermionic saturation current, A
    // thermionic-field emission (reverse polarity)
    double tfe_pre = 0.0;   // A / sqrt(J^2)
    double e00 = 0.0;       // J
    double barrier = 0.0;   // J, q*phi/cosh^2(x)
    double eps_prime = 0.0; // J
};

Contact make_contact(double n_disc, const DeviceParams& p) {
    Contact c;
    const double t = p.t0;
    c.kt = p.kb * t;
    const double phi = effective_barrier(n_disc, p) * kQ;
    c.i_sat = p.a_det * p.a_star * t * t * std::exp(-phi / c.kt);

    const double n = n_disc * kConcUnit;
    c.e00 = 0.5 * kQ * kHbar * std::sqrt(n / (kElectronMass * p.m_eff * p.eps_r * kEps0));
    const double x = c.e00 / c.kt;
    const double e0 = c.e00 / std::tanh(x);
    // x - tanh(x) loses all digits for small x
    const double denom = x > 0.1 ? x - std::tanh(x)
                                 : x * x * x / 3.0 - 2.0 * std::pow(x, 5) / 15.0 +
                                       17.0 * std::pow(x, 7) / 315.0;
    c.eps_prime = c.e00 / denom;
    const double ch = std::cosh(x);
    c.barrier = phi / (ch * ch);
    c.tfe_pre = p.a_det * p.a_star * t / p.kb * std::exp(-phi / e0);
    return c;
}

// Contact current and its derivative with respect to the contact voltage.
void contact_current(double v, const Contact& c, double& i, double& di) {
    const double u = kQ / c.kt;
    const double ex = std::exp(-u * v);
    i = -c.i_sat * std::expm1(-u * v);
    di = c.i_sat * u * ex;
    if (v > 0.0) {
        const double energy = kQ * v + c.barrier;
        const double root = std::sqrt(kPi * c.e00 * energy);
        const double w = kQ * v / c.eps_prime;
        const double em1 = std::expm1(w);
        i += c.tfe_pre * root * em1;
        di += c.tfe_pre * (0.5 * kPi * c.e00 * kQ / root * em1 +
                           root * (kQ / c.eps_prime) * (em1 + 1.0));
    }
}

double disc_resistance(double n_disc, const DeviceParams& p) {
    return p.l_det / (p.z_vo * kQ * n_disc * kConcUnit * p.mobility * p.a_det);
}

double plug_resistance(const DeviceParams& p) {
    return p.l_plug / (p.z_vo * kQ * p.n_plug * kConcUnit * p.mobility * p.a_det);
}

// Voltage across the self-heated line resistance and its derivative in i.
void line_voltage(double i, const DeviceParams& p, double& v, double& dv) {
    const double k = p.alpha_line * p.r_line * p.rth_line;
    v = p.r_line * i * (1.0 + k * i * i);
    dv = p.r_line * (1.0 + 3.0 * k * i * i);
}

}  // namespace

void DeviceParams::validate() const {
    for (double x : {a_det, n_disc_min, l_cell, l_plug, l_det, r_series, r_line, r_tiox, gamma0,
                     rth0_set, rth_line, a_star, kb, rd, a_hop, t0, n_disc_max, n_plug,
                     mobility, eps_r, eps_phib, z_vo, m_eff, window_exp}) {
        require(std::isfinite(x) && x > 0.0, "all lengths, areas, resistances, temperatures and "
                                             "material constants must be strictly positive");
    }
    require(std::isfinite(e_phi_bn0) && e_phi_bn0 >= 0.0, "e_phi_bn0 >= 0");
    require(std::isfinite(delta_e_a) && delta_e_a >= 0.0, "delta_e_a >= 0");
    require(std::isfinite(alpha_line) && alpha_line >= 0.0, "alpha_line >= 0");
    require(std::isfinite(phi_n), "phi_n finite");
    require(l_plug < l_cell, "l_plug < l_cell");
    require(l_det <= (l_cell - l_plug) * 1.01, "l_det <= l_cell - l_plug");
    require(n_disc_min < n_disc_max, "n_disc_min < n_disc_max");
    require(std::abs(kPi * rd * rd - a_det) <= 0.02 * a_det, "pi*rd^2 within 2% of a_det");
    require(std::abs(r_line + r_tiox - r_series) <= 0.02 * r_series,
            "r_series within 2% of r_line + r_tiox");
}

StackSolution solve_stack(double v_device, DeviceState state, const DeviceParams& p) {
    StackSolution s;
    if (v_device == 0.0) return s;
    if (!std::isfinite(v_device)) throw NonConvergence("stack solve: non-finite bias");

    const Contact c = make_contact(state.n_disc, p);
    const double r_fixed = disc_resistance(state.n_disc, p) + plug_resistance(p) + p.r_tiox;

    // g(x) = x + I(x) r_fixed + V_line(I(x)) - v is increasing in the contact voltage x
    double lo = std::min(0.0, v_device);
    double hi = std::max(0.0, v_device);
    double x = 0.5 * (lo + hi);
    const double tol = 1e-10 * std::abs(v_device);
    double last_step = hi - lo;
    for (int it = 1; it <= 100; ++it) {
        double i = 0.0, di = 0.0, vl = 0.0, dvl = 0.0;
        contact_current(x, c, i, di);
        line_voltage(i, p, vl, dvl);
        const double g = x + i * r_fixed + vl - v_device;
        const double dg = 1.0 + di * (r_fixed + dvl);
        if (g > 0.0) hi = x; else lo = x;
        double next = x - g / dg;
        // bisect when Newton leaves the bracket or crawls along the exponential
        if (!(next > lo && next < hi) || std::abs(2.0 * g) > std::abs(last_step * dg))
            next = 0.5 * (lo + hi);
        last_step = next - x;
        const double step = std::abs(next - x);
        x = next;
        if (step <= tol || hi - lo <= tol) {
            // one more Newton step: the tolerance bounds x, but callers
            // differentiate the current, which needs it smooth in v_device
            contact_current(x, c, i, di);
            line_voltage(i, p, vl, dvl);
            const double polished = x - (x + i * r_fixed + vl - v_device) /
                                            (1.0 + di * (r_fixed + dvl));
            if (polished >= std::min(0.0, v_device) && polished <= std::max(0.0, v_device))
                x = polished;
            contact_current(x, c, i, di);
            line_voltage(i, p, vl, dvl);
            s.current = i;
            s.v_schottky = x;
            s.v_disc = i * disc_resistance(state.n_disc, p);
            s.v_plug = i * plug_resistance(p);
            s.v_tiox = i * p.r_tiox;
            s.v_line = vl;
            s.iterations = it;
            return s;
        }
    }
    throw NonConvergence("stack solve did not converge at v=" + std::to_string(v_device) +
                         " n_disc=" + std::to_string(state.n_disc));
}

double device_current(double v_device, DeviceState state, const DeviceParams& p) {
    return solve_stack(v_device, state, p).current;
}

double local_temperature(const StackSolution& s, const DeviceParams& p) {
    const double power =
        std::abs(s.current) * (std::abs(s.v_schottky) + std::abs(s.v_disc) + std::abs(s.v_plug));
    return p.t0 + power * p.rth0_set;
}

double state_derivative(double v_device, DeviceState state, const DeviceParams& p) {
    if (v_device == 0.0) return 0.0;
    const StackSolution s = solve_stack(v_device, state, p);
    const double field = (s.v_schottky + s.v_disc) / p.l_det;
    if (field == 0.0) return 0.0;
    const double kt = p.kb * local_temperature(s, p);
    const double rate = p.gamma0 * std::exp(-kQ * p.delta_e_a / kt) *
                        std::sinh(p.a_hop * p.z_vo * kQ * std::abs(field) / (2.0 * kt));
    const double mean_conc = 0.5 * (p.n_plug + state.n_disc);
    const double flux = mean_conc * p.a_hop * rate / p.l_det;
    const double n = state.n_disc;
    if (field < 0.0) {
        const double window = 1.0 - std::pow(n / p.n_disc_max, p.window_exp);
        return window > 0.0 ? flux * window : 0.0;
    }
    const double window = 1.0 - std::pow(p.n_disc_min / n, p.window_exp);
    return window > 0.0 ? -flux * window : 0.0;
}

DeviceState integrate_step(DeviceState state, double v_device, double dt, const DeviceParams& p,
                           const IntegratorOptions& opt) {
    if (!(dt > 0.0)) throw InvalidArgument("integrate_step: dt must be > 0");
    const double lo = p.n_disc_min;
    const double hi = p.n_disc_max;
    double n = std::clamp(state.n_disc, lo, hi);
    if (v_device == 0.0) return {n};

    const double h_min = std::ldexp(dt, -opt.max_halvings);
    double t = 0.0;
    double h = dt;
    while (t < dt) {
        h = std::min(h, dt - t);
        const double k1 = state_derivative(v_device, {n}, p);
        if (k1 == 0.0) break;  // pinned at the boundary it is driven toward
        if (std::abs(h * k1) > opt.max_rel_change * n)
            h = std::max(0.9 * opt.max_rel_change * n / std::abs(k1), h_min);
        // shrink the trial step until both stages respect the change bound
        for (;;) {
            if (std::abs(h * k1) <= opt.max_rel_change * n) {
                const double raw_mid = n + 0.5 * h * k1;
                if (raw_mid <= lo || raw_mid >= hi) {
                    // the half step already crosses the boundary being approached;
                    // the remaining gap is below the change bound, so land on it
                    n = std::clamp(raw_mid, lo, hi);
                    break;
                }
                const double mid = raw_mid;
                const double k2 = state_derivative(v_device, {mid}, p);
                if (std::abs(h * k2) <= opt.max_rel_change * n) {
                    n = std::clamp(n + h * k2, lo, hi);
                    break;
                }
            }
            if (h <= h_min) {
                throw StepTooLarge("integrate_step: state change exceeds bound at minimum sub-step " +
                                   std::to_string(h) + " s (v=" + std::to_string(v_device) + ")");
            }
            h = std::max(0.5 * h, h_min);
        }
        t += h;
        h *= 2.0;
    }
    return {n};
}

std::vector<SweepSample> quasi_static_sweep(double v_start, std::span<const double> v_peaks,
                                            double rate, const DeviceParams& p,
                                            DeviceState initial, const SweepOptions& opt) {
    if (!(rate > 0.0)) throw InvalidArgument("sweep rate must be > 0");
    if (!(opt.dv > 0.0)) throw InvalidArgument("sweep voltage step must be > 0");
    std::vector<SweepSample> out;
    DeviceState st{std::clamp(initial.n_disc, p.n_disc_min, p.n_disc_max)};
    double t = 0.0;
    double v = v_start;
    out.push_back({t, v, device_current(v, st, p), st});
    for (double target : v_peaks) {
        const double span = target - v;
        const auto steps = static_cast<long>(std::ceil(std::abs(span) / opt.dv - 1e-9));
        const double v0 = v;
        for (long k = 1; k <= steps; ++k) {
            const double v_next = k == steps ? target : v0 + span * double(k) / double(steps);
            const double dt = std::abs(v_next - v) / rate;
            st = integrate_step(st, 0.5 * (v + v_next), dt, p, opt.integrator);
            t += dt;
            v = v_next;
            out.push_back({t, v, device_current(v, st, p), st});
        }
    }
    return out;
}

double conductance_readout(DeviceState state, const DeviceParams& p, double v_read) {
    if (!(v_read > 0.0 && v_read <= kMaxReadVoltage)) {
        throw ReadVoltageOutOfRange("read voltage " + std::to_string(v_read) +
                                    " V outside (0, 0.25] V");
    }
    return device_current(v_read, state, p) / v_read;
}

}  // namespace regmem
