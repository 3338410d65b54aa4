#include "pinnctl/pinn_controller.hpp"

#include <algorithm>
#include <cmath>

#include "pinnctl/csv.hpp"

namespace pinnctl {

namespace {

bool finite(const StateVector& x) { return std::isfinite(x.v_o) && std::isfinite(x.i_L); }

bool finite_outputs(const OutputSet& out) {
    for (const StateVector& x : out.x_hat)
        if (!finite(x)) return false;
    for (double u : out.u_hat)
        if (!std::isfinite(u)) return false;
    for (double d : out.d_hat)
        if (!std::isfinite(d)) return false;
    return std::isfinite(out.theta.C_hat) && std::isfinite(out.theta.L_hat);
}

} // namespace

ControllerState make_controller_state(const NetModel& net) {
    ControllerState s;
    s.C_prev = net.C_nom;
    s.L_prev = net.L_nom;
    return s;
}

StepResult step(const ControllerState& ctrl, const StateVector& measurement, double y_ref,
                const NetModel& net) {
    net.validate();

    StepResult r;
    r.state = ctrl;
    r.telemetry.duty = ctrl.prev_duty;
    r.telemetry.fault = true;
    r.duty = ctrl.prev_duty;
    if (!finite(measurement)) return r;

    const StateVector prev = ctrl.primed ? ctrl.prev : measurement;

    InputSet in;
    in.v_o_del = prev.v_o;
    in.v_o = measurement.v_o;
    in.dv_o = measurement.v_o - prev.v_o;
    in.i_L_del = prev.i_L;
    in.i_L = measurement.i_L;
    in.di_L = measurement.i_L - prev.i_L;
    in.y_del = y_ref - prev.v_o;
    in.y = y_ref - measurement.v_o;
    in.dy = in.y - in.y_del;
    in.d_prev = ctrl.d_prev;
    in.c_prev = ctrl.C_prev;
    in.l_prev = ctrl.L_prev;
    r.telemetry.input = in;

    const OutputSet out = forward(net, in);
    r.telemetry.x_hat = out.x_hat;
    r.telemetry.u_hat = out.u_hat;
    r.telemetry.d_hat = out.d_hat;
    r.telemetry.theta = out.theta;

    if (!finite_outputs(out)) return r; // fail-safe: hold duty, keep state

    r.duty = std::clamp(out.u_hat[0], 0.0, 1.0);
    r.telemetry.duty = r.duty;
    r.telemetry.fault = false;

    const LtvModel model = build_ltv(out.theta, net.T_ctrl, net.V_in);
    const StateVector roll =
        forward_predict(model, measurement, out.u_hat[0], DisturbanceEstimate{out.d_hat[0]});
    r.telemetry.phy_residual =
        std::hypot(out.x_hat[0].v_o - roll.v_o, out.x_hat[0].i_L - roll.i_L);

    r.state.prev = measurement;
    r.state.prev_duty = r.duty;
    r.state.d_prev = out.d_hat[0];
    r.state.C_prev = out.theta.C_hat;
    r.state.L_prev = out.theta.L_hat;
    r.state.primed = true;
    return r;
}

TelemetryRow make_telemetry_row(double t, const StateVector& measurement,
                                const StepTelemetry& tel) {
    TelemetryRow row;
    row.t = t;
    row.v_o = measurement.v_o;
    row.i_L = measurement.i_L;
    row.duty = tel.duty;
    row.d_hat = tel.d_hat.empty() ? 0.0 : tel.d_hat[0];
    row.C_hat = tel.theta.C_hat;
    row.L_hat = tel.theta.L_hat;
    row.fault = tel.fault;
    return row;
}

void write_telemetry_csv(const std::string& path, const std::vector<TelemetryRow>& rows) {
    CsvWriter csv(path);
    csv.header({"t", "v_o", "i_L", "duty", "d_hat", "C_hat", "L_hat", "fault_flag"});
    for (const TelemetryRow& r : rows)
        csv.row({r.t, r.v_o, r.i_L, r.duty, r.d_hat, r.C_hat, r.L_hat, r.fault ? 1.0 : 0.0});
    csv.commit();
}

} // namespace pinnctl
