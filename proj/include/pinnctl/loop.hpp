#pragma once

#include <string>
#include <vector>

#include "pinnctl/control.hpp"
#include "pinnctl/converter.hpp"
#include "pinnctl/net.hpp"
#include "pinnctl/pinn_controller.hpp"

namespace pinnctl {

/// One closed-loop experiment: plant (with its load schedule), reference,
/// duration, and the control period the loop samples at.
struct ScenarioConfig {
    std::string name = "scenario";
    PlantConfig plant;
    double duration = 0.1; // [s]
    double y_ref = 25.0;   // [V]
    double T_ctrl = 5e-5;  // [s]

    /// Throws ConfigError unless duration > 0 and T_ctrl is a positive
    /// integer multiple of plant.sim_dt.
    void validate() const;
};

/// Equilibrium at the reference under the load in effect at time t:
/// v = y_ref, i matched to the load current.
StateVector equilibrium_state(const PlantConfig& plant, double y_ref, double t = 0.0);

enum class ControllerKind { Expert, Pi, Pinn };

struct LoopMetrics {
    // Earliest time after which v_o stays within the band to the end of the
    // run; duration when it never settles.
    double settling_time = 0.0;
    double peak_deviation = 0.0;      // max |v_o - y_ref| [V]
    double steady_state_error = 0.0;  // |mean error| over the final 10% [V]
    double ise = 0.0;                 // sum of e^2 * T_ctrl [V^2 s]
    double band_fraction = 0.02;
};

LoopMetrics compute_metrics(const Trajectory& traj, double y_ref,
                            double band_fraction = 0.02);

/// Recovery check per disturbance event: reentry_time is the earliest time
/// >= event_time at which v_o is inside the band and stays there until the
/// next event (or the end); returned is false when no such time exists.
struct BandReturn {
    double event_time = 0.0;
    double reentry_time = 0.0;
    bool returned = false;
};

std::vector<BandReturn> band_returns(const Trajectory& traj, double y_ref,
                                     double band_fraction,
                                     const std::vector<double>& event_times);

struct LoopResult {
    Trajectory traj; // sampled at control boundaries, row 0 is the initial state
    LoopMetrics metrics;
    std::vector<TelemetryRow> telemetry; // Pinn runs only
    int fault_count = 0;                 // Pinn runs only
};

/// Runs the scenario under the chosen controller. The expert gets the true
/// plant parameters (privileged baseline); the network controller starts
/// cold. `net` is required for Pinn and ignored otherwise.
LoopResult run_closed_loop(const ScenarioConfig& sc, ControllerKind kind,
                           const NetModel* net = nullptr, const PiConfig& pi = PiConfig{},
                           const CostWeights& weights = CostWeights{});

/// Load-step scenarios mirroring the evaluation protocol: constant-power
/// 60->120->60 W and 100->200->100 W with switches at 30/70 ms, plus a
/// resistive 4->2 ohm dip on the same timing.
std::vector<ScenarioConfig> preset_scenarios();

} // namespace pinnctl
