#include "pinnctl/control.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pinnctl {

namespace {

struct Mat2 {
    double m00 = 0.0, m01 = 0.0, m10 = 0.0, m11 = 0.0;
};

Mat2 mul(const Mat2& a, const Mat2& b) {
    return {a.m00 * b.m00 + a.m01 * b.m10, a.m00 * b.m01 + a.m01 * b.m11,
            a.m10 * b.m00 + a.m11 * b.m10, a.m10 * b.m01 + a.m11 * b.m11};
}

Mat2 model_a(const LtvModel& m) { return {m.a11, m.a12, m.a21, m.a22}; }

/// A^0..A^n.
std::vector<Mat2> matrix_powers(const Mat2& a, int n) {
    std::vector<Mat2> p(static_cast<std::size_t>(n) + 1);
    p[0] = {1.0, 0.0, 0.0, 1.0};
    for (int i = 1; i <= n; ++i) {
        p[i] = mul(p[i - 1], a);
    }
    return p;
}

/// d(A^i)/dp given dA/dp, via the product rule on P_i = P_{i-1} A.
std::vector<Mat2> power_derivatives(const std::vector<Mat2>& p, const Mat2& a,
                                    const Mat2& da) {
    std::vector<Mat2> dp(p.size());
    dp[0] = {};
    for (std::size_t i = 1; i < p.size(); ++i) {
        const Mat2 t1 = mul(dp[i - 1], a);
        const Mat2 t2 = mul(p[i - 1], da);
        dp[i] = {t1.m00 + t2.m00, t1.m01 + t2.m01, t1.m10 + t2.m10, t1.m11 + t2.m11};
    }
    return dp;
}

/// Cholesky factorization in place (lower triangle), n x n row-major.
void cholesky(std::vector<double>& m, int n) {
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = m[i * n + j];
            for (int k = 0; k < j; ++k) {
                s -= m[i * n + k] * m[j * n + k];
            }
            if (i == j) {
                if (!(s > 0.0)) {
                    throw SingularModel("normal matrix is not positive definite");
                }
                m[i * n + i] = std::sqrt(s);
            } else {
                m[i * n + j] = s / m[j * n + j];
            }
        }
    }
}

void cholesky_solve(const std::vector<double>& l, int n, std::vector<double>& x) {
    for (int i = 0; i < n; ++i) {
        double s = x[i];
        for (int k = 0; k < i; ++k) {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = x[i];
        for (int k = i + 1; k < n; ++k) {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
}

double norm1(const std::vector<double>& m, int n) {
    double best = 0.0;
    for (int j = 0; j < n; ++j) {
        double col = 0.0;
        for (int i = 0; i < n; ++i) {
            col += std::abs(m[i * n + j]);
        }
        best = std::max(best, col);
    }
    return best;
}

} // namespace

void CostWeights::validate() const {
    if (!(Q > 0.0) || !(R_u > 0.0) || horizon < 1) {
        throw ConfigError("cost weights require Q > 0, R_u > 0, horizon >= 1");
    }
}

double cost_J(const std::vector<double>& y_pred, double y_ref, const std::vector<double>& u,
              const std::vector<double>& u_hat, const CostWeights& w) {
    const std::size_t n = static_cast<std::size_t>(w.horizon);
    if (y_pred.size() != n || u.size() != n || u_hat.size() != n) {
        throw LengthMismatch("cost_J expects arrays of length " + std::to_string(n));
    }
    double j = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ey = y_pred[i] - y_ref;
        const double eu = u[i] - u_hat[i];
        j += w.Q * ey * ey + w.R_u * eu * eu;
    }
    return j;
}

PredictionOperators build_prediction(const LtvModel& model, int n) {
    PredictionOperators p;
    p.n = n;
    p.phi_v.resize(n);
    p.phi_i.resize(n);
    p.theta_u.assign(static_cast<std::size_t>(n) * n, 0.0);
    p.theta_d.resize(n);

    const auto powers = matrix_powers(model_a(model), n);
    double d_accum = 0.0;
    for (int i = 0; i < n; ++i) {
        // Output row is C = [1, 0]: only the first row of each power matters.
        p.phi_v[i] = powers[i + 1].m00 * model.c1 + powers[i + 1].m10 * model.c2;
        p.phi_i[i] = powers[i + 1].m01 * model.c1 + powers[i + 1].m11 * model.c2;
        for (int j = 0; j <= i; ++j) {
            const Mat2& pw = powers[i - j];
            p.theta_u[i * n + j] = model.c1 * (pw.m00 * model.b1 + pw.m01 * model.b2) +
                                   model.c2 * (pw.m10 * model.b1 + pw.m11 * model.b2);
        }
        d_accum += model.c1 * (powers[i].m00 * model.e1 + powers[i].m01 * model.e2) +
                   model.c2 * (powers[i].m10 * model.e1 + powers[i].m11 * model.e2);
        p.theta_d[i] = d_accum;
    }
    return p;
}

namespace {

/// Normal matrix M = Q*Theta'Theta + R*I and its inverse; throws on
/// condition number above 1e12.
void build_normal_inverse(const PredictionOperators& p, const CostWeights& w,
                          std::vector<double>& m, std::vector<double>& m_inv) {
    const int n = p.n;
    m.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int r = std::max(i, j); r < n; ++r) {
                s += p.theta_u[r * n + i] * p.theta_u[r * n + j];
            }
            m[i * n + j] = w.Q * s + (i == j ? w.R_u : 0.0);
        }
    }
    std::vector<double> l = m;
    cholesky(l, n);
    m_inv.assign(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> col(n);
    for (int j = 0; j < n; ++j) {
        std::fill(col.begin(), col.end(), 0.0);
        col[j] = 1.0;
        cholesky_solve(l, n, col);
        for (int i = 0; i < n; ++i) {
            m_inv[i * n + j] = col[i];
        }
    }
    const double cond = norm1(m, n) * norm1(m_inv, n);
    if (cond > 1e12) {
        throw SingularModel("MPC normal matrix condition " + std::to_string(cond));
    }
}

} // namespace

ExpertSolution expert_control_full(const LtvModel& model, const StateVector& x,
                                   double y_ref, const DisturbanceEstimate& d,
                                   double u_prev, const CostWeights& w) {
    w.validate();
    const int n = w.horizon;
    ExpertSolution sol;
    sol.pred = build_prediction(model, n);

    std::vector<double> m;
    build_normal_inverse(sol.pred, w, m, sol.m_inv);

    // rhs = Q*Theta'*(y_ref - Phi x - theta_d d) + R*u_prev
    std::vector<double> resid(n);
    for (int i = 0; i < n; ++i) {
        resid[i] = y_ref - sol.pred.phi_v[i] * x.v_o - sol.pred.phi_i[i] * x.i_L -
                   sol.pred.theta_d[i] * d.d_hat;
    }
    std::vector<double> rhs(n);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = j; i < n; ++i) {
            s += sol.pred.theta_u[i * n + j] * resid[i];
        }
        rhs[j] = w.Q * s + w.R_u * u_prev;
    }

    sol.u.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            s += sol.m_inv[i * n + j] * rhs[j];
        }
        sol.u[i] = s;
    }
    return sol;
}

std::vector<double> expert_control(const LtvModel& model, const StateVector& x,
                                   double y_ref, const DisturbanceEstimate& d,
                                   double u_prev, const CostWeights& w) {
    return expert_control_full(model, x, y_ref, d, u_prev, w).u;
}

ExpertSensitivity expert_sensitivity(const ThetaEstimate& theta, double T_ctrl,
                                     double V_in, const StateVector& x, double y_ref,
                                     const DisturbanceEstimate& d, const CostWeights& w,
                                     const ExpertSolution& sol) {
    const int n = w.horizon;

    ExpertSensitivity out;
    out.dU_dC.assign(n, 0.0);
    out.dU_dL.assign(n, 0.0);
    out.dU_dd.assign(n, 0.0);

    const double T = T_ctrl;
    const double C = theta.C_hat;
    const double L = theta.L_hat;
    const Mat2 a{1.0, T / C, -T / L, 1.0};
    const double b1 = 0.0, b2 = T * V_in / L;
    const double e1 = T / C, e2 = 0.0;

    const auto powers = matrix_powers(a, n);

    std::vector<double> resid(n);
    for (int i = 0; i < n; ++i) {
        resid[i] = y_ref - sol.pred.phi_v[i] * x.v_o - sol.pred.phi_i[i] * x.i_L -
                   sol.pred.theta_d[i] * d.d_hat;
    }

    struct ParamDeriv {
        Mat2 da;
        double db1, db2, de1, de2;
    };
    const ParamDeriv wrt_c{{0.0, -T / (C * C), 0.0, 0.0}, 0.0, 0.0, -T / (C * C), 0.0};
    const ParamDeriv wrt_l{{0.0, 0.0, T / (L * L), 0.0}, 0.0, -T * V_in / (L * L), 0.0, 0.0};

    auto solve_direction = [&](const ParamDeriv& pd, std::vector<double>& dU) {
        const auto dpow = power_derivatives(powers, a, pd.da);

        std::vector<double> dphi_v(n), dphi_i(n), dtheta_d(n);
        std::vector<double> dtheta(static_cast<std::size_t>(n) * n, 0.0);
        double dacc = 0.0;
        for (int i = 0; i < n; ++i) {
            dphi_v[i] = dpow[i + 1].m00;
            dphi_i[i] = dpow[i + 1].m01;
            for (int j = 0; j <= i; ++j) {
                const Mat2& pw = powers[i - j];
                const Mat2& dpw = dpow[i - j];
                dtheta[i * n + j] = dpw.m00 * b1 + dpw.m01 * b2 + pw.m00 * pd.db1 + pw.m01 * pd.db2;
            }
            dacc += dpow[i].m00 * e1 + dpow[i].m01 * e2 + powers[i].m00 * pd.de1 +
                    powers[i].m01 * pd.de2;
            dtheta_d[i] = dacc;
        }

        // dU = M^-1 (drhs - dM U), with
        // dM = Q (dTheta'Theta + Theta'dTheta)
        // drhs = Q dTheta' resid + Q Theta' dresid, dresid_i = -dphi_i.x - dtheta_d_i d
        std::vector<double> v(n, 0.0);
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                const double dresid = -dphi_v[i] * x.v_o - dphi_i[i] * x.i_L -
                                      dtheta_d[i] * d.d_hat;
                s += dtheta[i * n + j] * resid[i] + sol.pred.theta_u[i * n + j] * dresid;
            }
            v[j] = w.Q * s;
        }
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) {
                double dm = 0.0;
                for (int r = 0; r < n; ++r) {
                    dm += dtheta[r * n + i] * sol.pred.theta_u[r * n + j] +
                          sol.pred.theta_u[r * n + i] * dtheta[r * n + j];
                }
                s += w.Q * dm * sol.u[j];
            }
            v[i] -= s;
        }
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) {
                s += sol.m_inv[i * n + j] * v[j];
            }
            dU[i] = s;
        }
    };

    solve_direction(wrt_c, out.dU_dC);
    solve_direction(wrt_l, out.dU_dL);

    // d direction: only the residual moves.
    std::vector<double> v(n, 0.0);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = j; i < n; ++i) {
            s += sol.pred.theta_u[i * n + j] * (-sol.pred.theta_d[i]);
        }
        v[j] = w.Q * s;
    }
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            s += sol.m_inv[i * n + j] * v[j];
        }
        out.dU_dd[i] = s;
    }
    return out;
}

ExpertController::ExpertController(ThetaEstimate theta, double T_ctrl, double V_in,
                                   CostWeights w)
    : theta_(theta), T_ctrl_(T_ctrl), V_in_(V_in), w_(w) {
    w_.validate();
}

double ExpertController::step(const StateVector& measurement, double y_ref) {
    if (!warm_) {
        // Steady-state guesses: d = -i_L holds at any equilibrium, and the
        // feedforward duty v/V_in holds the present voltage.
        d_hat_ = -measurement.i_L;
        u_prev_ = std::clamp(measurement.v_o / V_in_, 0.0, 1.0);
        warm_ = true;
    } else {
        d_hat_ = estimate_disturbance(prev_, measurement, theta_, T_ctrl_);
    }
    prev_ = measurement;

    const LtvModel model = build_ltv(theta_, T_ctrl_, V_in_);
    const auto u = expert_control(model, measurement, y_ref, {d_hat_}, u_prev_, w_);
    const double duty = std::clamp(u[0], 0.0, 1.0);
    u_prev_ = duty;
    return duty;
}

void PiConfig::validate() const {
    if (!std::isfinite(v_kp) || !std::isfinite(v_ki) || !std::isfinite(i_kp) ||
        !std::isfinite(i_ki)) {
        throw ConfigError("PI gains must be finite");
    }
    if (!(duty_min < duty_max) || !(i_ref_limit > 0.0) || !(v_int_limit > 0.0) ||
        !(i_int_limit > 0.0)) {
        throw ConfigError("PI limits must be ordered and positive");
    }
}

double pi_control(const StateVector& state, double y_ref, const PiConfig& cfg, double dt,
                  PiState& s) {
    const double e_v = y_ref - state.v_o;
    s.v_int = std::clamp(s.v_int + cfg.v_ki * e_v * dt, -cfg.v_int_limit, cfg.v_int_limit);
    const double i_ref = std::clamp(cfg.v_kp * e_v + s.v_int, -cfg.i_ref_limit, cfg.i_ref_limit);

    const double e_i = i_ref - state.i_L;
    s.i_int = std::clamp(s.i_int + cfg.i_ki * e_i * dt, -cfg.i_int_limit, cfg.i_int_limit);
    return std::clamp(cfg.i_kp * e_i + s.i_int, cfg.duty_min, cfg.duty_max);
}

} // namespace pinnctl
