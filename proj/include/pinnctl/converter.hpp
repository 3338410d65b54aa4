#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pinnctl/errors.hpp"

namespace pinnctl {

/// Converter state: output (capacitor) voltage and inductor current.
struct StateVector {
    double v_o = 0.0; // output voltage [V]
    double i_L = 0.0; // inductor current [A]
};

enum class LoadKind { Impedance, ConstantPower };

/// Piecewise-constant load: an initial value plus optional scheduled
/// switches (strictly increasing times). Impedance value is ohms,
/// constant-power value is watts.
struct LoadDescriptor {
    LoadKind kind = LoadKind::Impedance;
    double value = 10.0;
    std::vector<std::pair<double, double>> schedule; // (switch time [s], new value)

    /// Load value in effect at time t. Switches take effect at t >= switch time.
    double value_at(double t) const;

    /// Throws ConfigError on non-positive impedance, negative power, or
    /// non-increasing schedule times.
    void validate() const;
};

/// Full plant description. L/C carry both the nominal values (what the
/// controller's model believes) and the true values (what the simulated
/// hardware has); the deviations dL(), dC() are derived, never stored.
struct PlantConfig {
    double V_in = 50.0;     // source voltage [V]
    double L_N = 2e-3;      // nominal inductance [H]
    double C_N = 1e-3;      // nominal capacitance [F]
    double L_true = 2e-3;   // actual inductance [H]
    double C_true = 1e-3;   // actual capacitance [F]
    LoadDescriptor load;
    double sim_dt = 1e-6;   // integration step [s]
    double v_floor = 0.5;   // CPL voltage guard [V]

    double dL() const { return L_true - L_N; }
    double dC() const { return C_true - C_N; }

    void validate() const;
};

struct Derivatives {
    double dv_o_dt = 0.0; // [V/s]
    double di_L_dt = 0.0; // [A/s]
};

/// Lumped uncertainty on the inductor branch: -dL * di_L/dt. [V]
double eta1(double di_L_dt, const PlantConfig& cfg);

/// Lumped uncertainty on the capacitor node: load current term minus
/// dC * dv_o/dt. Uses the load in effect at time t. [A]
/// Throws DegenerateVoltage for a CPL with v_o below the floor.
double eta2(const StateVector& state, double dv_o_dt, const PlantConfig& cfg,
            double t = 0.0);

/// Right-hand side of the averaged converter model with the uncertainty
/// terms folded in. Because eta1 depends on di_L/dt and eta2 on dv_o/dt,
/// the implicit algebra is solved in closed form:
///   di_L/dt = (-v_o + V_in*u) / L_true
///   dv_o/dt = (i_L + load_term) / C_true
/// with load_term = -v_o/R_imp or -P_CPL/v_o.
Derivatives derivatives(const StateVector& state, double duty,
                        const PlantConfig& cfg, double t = 0.0);

/// One classical RK4 step of length cfg.sim_dt starting at time t. The load
/// value is resolved once at the step start and held across the stages, so
/// schedule switches snap to the integration grid. Throws InvalidDuty,
/// DegenerateVoltage, or NonFiniteState.
StateVector integrate_step(const StateVector& state, double duty,
                           const PlantConfig& cfg, double t = 0.0);

/// Advances the state through n_steps integration steps with the duty held
/// constant (one control period when n_steps = T_ctrl / sim_dt).
StateVector advance(StateVector state, double duty, const PlantConfig& cfg,
                    double t, int n_steps);

/// Load current term of eta2 at time t: -v_o/R or -P/v_o. This is the
/// quantity the discrete model's disturbance channel represents.
double load_current_term(const StateVector& state, const PlantConfig& cfg,
                         double t);

/// Decimated closed-loop trace. Columns mirror the exported CSV.
struct Trajectory {
    std::vector<double> t;
    std::vector<double> v_o;
    std::vector<double> i_L;
    std::vector<double> duty;
    std::vector<double> load_value;
    std::vector<int> load_kind; // 0 = impedance, 1 = constant power

    std::size_t size() const { return t.size(); }
    void push(double time, const StateVector& x, double u, const PlantConfig& cfg);
};

/// Writes `t,v_o,i_L,duty,load_value,load_kind` rows. Atomic
/// (write-temp-then-rename).
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

} // namespace pinnctl
