#pragma once

#include <stdexcept>
#include <string>

namespace pinnctl {

/// Base class for all typed pinnctl errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// CPL load evaluated while v_o is below the configured voltage floor.
struct DegenerateVoltage : Error {
    using Error::Error;
};

/// Duty ratio outside [0, 1] reached the plant model.
struct InvalidDuty : Error {
    using Error::Error;
};

/// A state component became NaN or Inf during integration.
struct NonFiniteState : Error {
    using Error::Error;
};

/// Discrete model matrix is not invertible (or the MPC normal matrix is
/// too ill-conditioned to solve).
struct SingularModel : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct LengthMismatch : Error {
    using Error::Error;
};

/// Training loss became non-finite; message carries the iteration.
struct NonFiniteLoss : Error {
    using Error::Error;
};

/// A closed-loop run aborted; message carries the scenario id.
struct SimulationDiverged : Error {
    using Error::Error;
};

/// Bad user-facing configuration (CLI, config file, dataset spec).
struct ConfigError : Error {
    using Error::Error;
};

} // namespace pinnctl
