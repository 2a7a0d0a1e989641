#pragma once

// Slow long-double reference for the device stack: plain bisection on the
// contact voltage with no Newton steps and no shared code with the library.

#include "regmem/device_model.hpp"

namespace regmem::testing {

struct ReferenceStack {
    long double current = 0;
    long double v_contact = 0;
    long double v_disc = 0;
    long double v_plug = 0;
};

ReferenceStack reference_stack(long double v, long double n_disc, const DeviceParams& p);
long double reference_current(long double v, long double n_disc, const DeviceParams& p);
/// dn/dt from the ion-hopping law at the reference operating point.
long double reference_rate(long double v, long double n_disc, const DeviceParams& p);
/// Read resistance V/I at `v_read`.
long double reference_read_resistance(long double n_disc, const DeviceParams& p,
                                      long double v_read = 0.25L);

}  // namespace regmem::testing
