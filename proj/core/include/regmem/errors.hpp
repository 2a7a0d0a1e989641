#pragma once

#include <stdexcept>
#include <string>

namespace regmem {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: configuration, argument ranges, malformed files. CLI exit code 1.
class InputError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed on valid input. CLI exit code 2.
class NumericalError : public Error {
public:
    using Error::Error;
};

#define REGMEM_DEFINE_ERROR(Name, Base)        \
    class Name : public Base {                 \
    public:                                    \
        using Base::Base;                      \
    };

REGMEM_DEFINE_ERROR(ConfigError, InputError)
REGMEM_DEFINE_ERROR(ParseError, InputError)
REGMEM_DEFINE_ERROR(InvalidArgument, InputError)
REGMEM_DEFINE_ERROR(ReadVoltageOutOfRange, InputError)
REGMEM_DEFINE_ERROR(CodeOutOfRange, InputError)
REGMEM_DEFINE_ERROR(TargetOutOfRange, InputError)
REGMEM_DEFINE_ERROR(RefOutOfOpampRange, InputError)
REGMEM_DEFINE_ERROR(RefAboveSupply, InputError)
REGMEM_DEFINE_ERROR(NegativeCurrent, InputError)
REGMEM_DEFINE_ERROR(InconsistentDrive, InputError)
REGMEM_DEFINE_ERROR(AmplitudeOutOfRange, InputError)
REGMEM_DEFINE_ERROR(WeightOutOfRange, InputError)
REGMEM_DEFINE_ERROR(Unreachable, InputError)
REGMEM_DEFINE_ERROR(PreStateNotHRS, InputError)
REGMEM_DEFINE_ERROR(OutputExists, InputError)

REGMEM_DEFINE_ERROR(NonConvergence, NumericalError)
REGMEM_DEFINE_ERROR(StepTooLarge, NumericalError)
REGMEM_DEFINE_ERROR(SingularMatrix, NumericalError)

#undef REGMEM_DEFINE_ERROR

/// Prefix `what` with a context string, keeping the dynamic type of the error.
[[noreturn]] void rethrow_with_context(const std::string& context);

}  // namespace regmem
