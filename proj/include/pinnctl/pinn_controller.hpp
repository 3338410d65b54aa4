#pragma once

#include <string>
#include <vector>

#include "pinnctl/net.hpp"
#include "pinnctl/physics.hpp"

namespace pinnctl {

/// Controller memory threaded through step(). The input vector uses exactly
/// one delayed tap per signal, so the history is a single previous sample.
struct ControllerState {
    StateVector prev;       // measurement one control period ago
    double prev_duty = 0.0; // applied duty, fail-safe hold value
    double d_prev = 0.0;    // previous d_hat[0]
    double C_prev = 0.0;    // previous theta estimate
    double L_prev = 0.0;
    bool primed = false; // false until the first measurement arrives
};

/// Cold start: nominal parameters, zero disturbance. The delayed sample is
/// seeded from the first measurement (zero deltas on the first step).
ControllerState make_controller_state(const NetModel& net);

/// Everything one step emits, kept for logging and cross-checks. u_hat is the
/// raw network duty sequence; duty is the applied (clamped or held) value.
struct StepTelemetry {
    InputSet input; // as assembled, including the recycled estimates
    std::vector<StateVector> x_hat;
    std::vector<double> u_hat;
    std::vector<double> d_hat;
    ThetaEstimate theta;
    double duty = 0.0;
    bool fault = false;
    // |x_hat[0] - one-step model roll under the net's own (u, d, theta)|.
    // Logged only; no action is taken on it.
    double phy_residual = 0.0;
};

struct StepResult {
    double duty = 0.0; // always in [0, 1]
    ControllerState state;
    StepTelemetry telemetry;
};

/// One control period: assemble the input vector from the measurement, the
/// delayed sample, and the recycled estimates; run the network; apply the
/// first duty element clamped to [0, 1]; store the new estimates.
///
/// Any non-finite value in the measurement or the decoded outputs trips the
/// fail-safe: the previous duty is held, the state is left untouched, and
/// telemetry.fault is set.
StepResult step(const ControllerState& ctrl, const StateVector& measurement, double y_ref,
                const NetModel& net);

struct TelemetryRow {
    double t = 0.0;
    double v_o = 0.0;
    double i_L = 0.0;
    double duty = 0.0;
    double d_hat = 0.0;
    double C_hat = 0.0;
    double L_hat = 0.0;
    bool fault = false;
};

TelemetryRow make_telemetry_row(double t, const StateVector& measurement,
                                const StepTelemetry& tel);

/// Header: t,v_o,i_L,duty,d_hat,C_hat,L_hat,fault_flag. Atomic replace.
void write_telemetry_csv(const std::string& path, const std::vector<TelemetryRow>& rows);

} // namespace pinnctl
