#pragma once

#include "pinnctl/converter.hpp"
#include "pinnctl/errors.hpp"

namespace pinnctl {

/// Real-time estimates of the converter's reactive components.
struct ThetaEstimate {
    double C_hat = 1e-3; // [F]
    double L_hat = 2e-3; // [H]
};

/// Lumped load-current disturbance estimate entering the voltage equation. [A]
struct DisturbanceEstimate {
    double d_hat = 0.0;
};

/// Discrete parameter-varying model over state (v_o, i_L):
///   v_o+ = v_o + (T/C)*i_L + (T/C)*d
///   i_L+ = i_L - (T/L)*v_o + (T*V_in/L)*u
/// i.e. forward-Euler discretization of the nominal converter dynamics with
/// the load current folded into the disturbance channel.
struct LtvModel {
    double T_ctrl = 5e-5;
    // A = [[a11, a12], [a21, a22]]
    double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;
    double b1 = 0.0, b2 = 0.0; // B column
    double e1 = 0.0, e2 = 0.0; // E column
    double c1 = 1.0, c2 = 0.0; // C_out row (output is v_o)

    double det_a() const { return a11 * a22 - a12 * a21; }
};

LtvModel build_ltv(const ThetaEstimate& theta, double T_ctrl, double V_in);

/// x~_{k+1} = A x_k + B u_k + E d_k. Plain matrix arithmetic, no saturation.
StateVector forward_predict(const LtvModel& model, const StateVector& x, double u,
                            const DisturbanceEstimate& d);

/// y_k = C_out x_k (the output voltage).
double measure(const LtvModel& model, const StateVector& x);

/// Exact algebraic inverse of forward_predict:
///   x~_k = A^-1 (x_{k+1} - B u_k - E d_k).
/// Throws SingularModel when |det A| <= 1e-12.
StateVector backward_reconstruct(const LtvModel& model, const StateVector& x_next,
                                 double u, const DisturbanceEstimate& d);

/// Disturbance estimate from two consecutive measurements, by inverting the
/// voltage row of the model: d = C_hat*(v_o - v_o_prev)/T - i_L_prev.
/// At steady state this recovers the (negative) load current exactly.
double estimate_disturbance(const StateVector& prev, const StateVector& current,
                            const ThetaEstimate& theta, double T_ctrl);

} // namespace pinnctl
