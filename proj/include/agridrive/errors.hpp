#pragma once

#include <stdexcept>
#include <string>

namespace agridrive {

// Base class for all contract violations raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RadiusTooSmall : Error {
    using Error::Error;
};
struct InconsistentSteering : Error {
    using Error::Error;
};
struct InvalidToothCounts : Error {
    using Error::Error;
};
struct NoSolution : Error {
    using Error::Error;
};
struct SpeedOutOfRange : Error {
    using Error::Error;
};
struct OutOfEnvelope : Error {
    using Error::Error;
};
struct TipOver : Error {
    using Error::Error;
};
struct InfeasibleDuty : Error {
    using Error::Error;
};

// Configuration / input-file problems. `field` carries a dotted path to the
// offending entry so CLI diagnostics can point at it.
struct ConfigError : Error {
    std::string field;
    ConfigError(const std::string& field_path, const std::string& what)
        : Error(field_path + ": " + what), field(field_path) {}
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace agridrive
