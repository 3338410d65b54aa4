#include "pinnctl/physics.hpp"

#include <cmath>
#include <string>

namespace pinnctl {

LtvModel build_ltv(const ThetaEstimate& theta, double T_ctrl, double V_in) {
    if (!(theta.C_hat > 0.0) || !(theta.L_hat > 0.0)) {
        throw ConfigError("parameter estimates must be strictly positive");
    }
    if (T_ctrl < 0.0 || !(V_in > 0.0)) {
        throw ConfigError("build_ltv requires T_ctrl >= 0 and V_in > 0");
    }
    LtvModel m;
    m.T_ctrl = T_ctrl;
    m.a11 = 1.0;
    m.a12 = T_ctrl / theta.C_hat;
    m.a21 = -T_ctrl / theta.L_hat;
    m.a22 = 1.0;
    m.b1 = 0.0;
    m.b2 = T_ctrl * V_in / theta.L_hat;
    m.e1 = T_ctrl / theta.C_hat;
    m.e2 = 0.0;
    m.c1 = 1.0;
    m.c2 = 0.0;
    return m;
}

StateVector forward_predict(const LtvModel& m, const StateVector& x, double u,
                            const DisturbanceEstimate& d) {
    StateVector next;
    next.v_o = m.a11 * x.v_o + m.a12 * x.i_L + m.b1 * u + m.e1 * d.d_hat;
    next.i_L = m.a21 * x.v_o + m.a22 * x.i_L + m.b2 * u + m.e2 * d.d_hat;
    return next;
}

double measure(const LtvModel& m, const StateVector& x) {
    return m.c1 * x.v_o + m.c2 * x.i_L;
}

StateVector backward_reconstruct(const LtvModel& m, const StateVector& x_next, double u,
                                 const DisturbanceEstimate& d) {
    const double det = m.det_a();
    if (std::abs(det) <= 1e-12) {
        throw SingularModel("|det A| = " + std::to_string(std::abs(det)) + " <= 1e-12");
    }
    const double r1 = x_next.v_o - m.b1 * u - m.e1 * d.d_hat;
    const double r2 = x_next.i_L - m.b2 * u - m.e2 * d.d_hat;
    StateVector x;
    x.v_o = (m.a22 * r1 - m.a12 * r2) / det;
    x.i_L = (-m.a21 * r1 + m.a11 * r2) / det;
    return x;
}

double estimate_disturbance(const StateVector& prev, const StateVector& current,
                            const ThetaEstimate& theta, double T_ctrl) {
    return theta.C_hat * (current.v_o - prev.v_o) / T_ctrl - prev.i_L;
}

} // namespace pinnctl
