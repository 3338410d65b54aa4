#pragma once

#include <vector>

#include "pinnctl/physics.hpp"

namespace pinnctl {

/// Quadratic cost weights and horizon for the predictive controller.
struct CostWeights {
    double Q = 5.0;   // tracking-error weight
    double R_u = 1.0; // control-deviation weight
    int horizon = 6;  // prediction steps n

    void validate() const;
};

/// J = sum_i Q*(y_i - y_ref)^2 + R*(u_i - u_hat_i)^2 over the horizon.
/// Throws LengthMismatch if the arrays disagree.
double cost_J(const std::vector<double>& y_pred, double y_ref,
              const std::vector<double>& u, const std::vector<double>& u_hat,
              const CostWeights& w);

/// Stacked n-step prediction of the output under the discrete model with the
/// disturbance held constant:  Y = Phi*x + Theta_u*U + theta_d*d.
/// Row i (0-based) predicts y_{k+1+i}.
struct PredictionOperators {
    int n = 0;
    std::vector<double> phi_v;    // n: coefficient of x.v_o in row i
    std::vector<double> phi_i;    // n: coefficient of x.i_L in row i
    std::vector<double> theta_u;  // n*n row-major, lower triangular
    std::vector<double> theta_d;  // n
};

PredictionOperators build_prediction(const LtvModel& model, int n);

/// Expert minimizer plus the pieces needed to differentiate it.
struct ExpertSolution {
    std::vector<double> u;     // unclamped minimizer of J, length n
    PredictionOperators pred;
    std::vector<double> m_inv; // n*n inverse of the normal matrix
};

/// Minimizes J over the horizon subject to the model dynamics, with the
/// disturbance held constant and the reference control u_hat = u_prev held
/// over the horizon. Closed-form batch solution; the returned minimizer is
/// unclamped (clamping happens at application). Throws SingularModel when
/// the normal matrix condition number exceeds 1e12.
ExpertSolution expert_control_full(const LtvModel& model, const StateVector& x,
                                   double y_ref, const DisturbanceEstimate& d,
                                   double u_prev, const CostWeights& w);

std::vector<double> expert_control(const LtvModel& model, const StateVector& x,
                                   double y_ref, const DisturbanceEstimate& d,
                                   double u_prev, const CostWeights& w);

/// Directional derivatives of the expert minimizer with respect to the
/// estimated capacitance, inductance, and disturbance, via differentiation
/// of the linear solve.
struct ExpertSensitivity {
    std::vector<double> dU_dC;
    std::vector<double> dU_dL;
    std::vector<double> dU_dd;
};

ExpertSensitivity expert_sensitivity(const ThetaEstimate& theta, double T_ctrl,
                                     double V_in, const StateVector& x, double y_ref,
                                     const DisturbanceEstimate& d, const CostWeights& w,
                                     const ExpertSolution& sol);

/// Stateful wrapper running the expert in closed loop: re-estimates the
/// disturbance from consecutive measurements each step, solves, applies the
/// first move clamped to [0, 1].
class ExpertController {
public:
    ExpertController(ThetaEstimate theta, double T_ctrl, double V_in, CostWeights w);

    /// Returns the duty to apply for the next control period.
    double step(const StateVector& measurement, double y_ref);

    /// Resync when the applied command differs from the returned one
    /// (actuator clamping, exploration dither): the next solve regularizes
    /// against what the plant actually saw.
    void set_previous_duty(double u) { u_prev_ = u; }

    /// Resync after a state discontinuity the transition model cannot
    /// explain (an injected impulse). Without this the next disturbance
    /// estimate reads the jump as a load of kick_v * C / T amperes and the
    /// solve slams the duty on garbage.
    void rebase(const StateVector& x) { prev_ = x; }

    double last_disturbance() const { return d_hat_; }
    double previous_duty() const { return u_prev_; }

private:
    ThetaEstimate theta_;
    double T_ctrl_;
    double V_in_;
    CostWeights w_;
    bool warm_ = false;
    StateVector prev_{};
    double d_hat_ = 0.0;
    double u_prev_ = 0.0;
};

/// Cascaded PI configuration: outer voltage loop produces a current
/// reference, inner current loop produces the duty. Integrators are clamped
/// to the anti-windup limits.
struct PiConfig {
    double v_kp = 0.8;
    double v_ki = 90.0;
    double i_kp = 0.25;
    double i_ki = 180.0;
    double i_ref_limit = 25.0;  // outer output clamp [A]
    double v_int_limit = 25.0;  // outer integrator clamp [A]
    double i_int_limit = 1.0;   // inner integrator clamp [duty]
    double duty_min = 0.0;
    double duty_max = 1.0;

    void validate() const;
};

struct PiState {
    double v_int = 0.0;
    double i_int = 0.0;
};

/// One cascaded-PI update; callers own the integrator state.
double pi_control(const StateVector& state, double y_ref, const PiConfig& cfg,
                  double dt, PiState& s);

} // namespace pinnctl
