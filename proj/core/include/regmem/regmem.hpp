#pragma once

#include "regmem/analog_frontend.hpp"
#include "regmem/config.hpp"
#include "regmem/crossbar_network.hpp"
#include "regmem/csv.hpp"
#include "regmem/device_model.hpp"
#include "regmem/errors.hpp"
#include "regmem/programming_control.hpp"
#include "regmem/transient_engine.hpp"
