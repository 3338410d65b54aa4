#include "pinnctl/loop.hpp"

#include <cmath>
#include <cstdlib>

namespace pinnctl {

void ScenarioConfig::validate() const {
    plant.validate();
    if (!(duration > 0.0)) throw ConfigError("scenario duration must be positive");
    if (!(T_ctrl > 0.0)) throw ConfigError("control period must be positive");
    const double ratio = T_ctrl / plant.sim_dt;
    const auto steps = static_cast<int>(std::llround(ratio));
    if (steps < 1 || std::abs(ratio - steps) > 1e-9) {
        throw ConfigError("control period must be an integer multiple of sim_dt");
    }
    if (!(y_ref > plant.v_floor)) {
        throw ConfigError("reference voltage must sit above the voltage floor");
    }
}

StateVector equilibrium_state(const PlantConfig& plant, double y_ref, double t) {
    const double value = plant.load.value_at(t);
    StateVector x;
    x.v_o = y_ref;
    x.i_L = (plant.load.kind == LoadKind::Impedance) ? y_ref / value : value / y_ref;
    return x;
}

LoopMetrics compute_metrics(const Trajectory& traj, double y_ref, double band_fraction) {
    if (traj.size() < 2) throw ConfigError("trajectory too short for metrics");
    LoopMetrics m;
    m.band_fraction = band_fraction;
    const double band = band_fraction * y_ref;
    const std::size_t count = traj.size();

    // Scan backwards: settled_from tracks the start of the suffix that stays
    // inside the band.
    std::size_t settled_from = count;
    for (std::size_t i = count; i-- > 0;) {
        if (std::abs(traj.v_o[i] - y_ref) <= band) {
            settled_from = i;
        } else {
            break;
        }
    }
    m.settling_time = settled_from < count ? traj.t[settled_from] : traj.t.back();

    double err_sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double e = traj.v_o[i] - y_ref;
        m.peak_deviation = std::max(m.peak_deviation, std::abs(e));
        if (i > 0) m.ise += e * e * (traj.t[i] - traj.t[i - 1]);
    }
    const std::size_t tail = std::max<std::size_t>(1, count / 10);
    for (std::size_t i = count - tail; i < count; ++i) err_sum += traj.v_o[i] - y_ref;
    m.steady_state_error = std::abs(err_sum / static_cast<double>(tail));
    return m;
}

std::vector<BandReturn> band_returns(const Trajectory& traj, double y_ref,
                                     double band_fraction,
                                     const std::vector<double>& event_times) {
    const double band = band_fraction * y_ref;
    std::vector<BandReturn> out;
    for (std::size_t e = 0; e < event_times.size(); ++e) {
        BandReturn br;
        br.event_time = event_times[e];
        const double until =
            (e + 1 < event_times.size()) ? event_times[e + 1] : traj.t.back() + 1.0;

        // Walk the window backwards; the earliest suffix inside the band is
        // the reentry point.
        std::size_t reentry = traj.size();
        for (std::size_t i = traj.size(); i-- > 0;) {
            if (traj.t[i] >= until) continue;
            if (traj.t[i] < br.event_time) break;
            if (std::abs(traj.v_o[i] - y_ref) <= band) {
                reentry = i;
            } else {
                break;
            }
        }
        if (reentry < traj.size()) {
            br.returned = true;
            br.reentry_time = traj.t[reentry];
        }
        out.push_back(br);
    }
    return out;
}

LoopResult run_closed_loop(const ScenarioConfig& sc, ControllerKind kind,
                           const NetModel* net, const PiConfig& pi,
                           const CostWeights& weights) {
    sc.validate();
    if (kind == ControllerKind::Pinn) {
        if (net == nullptr) throw ConfigError("network controller requires a model");
        net->validate();
    }
    if (kind == ControllerKind::Pi) pi.validate();

    const auto steps_per_ctrl = static_cast<int>(std::llround(sc.T_ctrl / sc.plant.sim_dt));
    const auto total = static_cast<int>(std::llround(sc.duration / sc.T_ctrl));

    StateVector x = equilibrium_state(sc.plant, sc.y_ref);

    ExpertController expert({sc.plant.C_true, sc.plant.L_true}, sc.T_ctrl, sc.plant.V_in,
                            weights);
    PiState pi_state;
    ControllerState ctl = (kind == ControllerKind::Pinn) ? make_controller_state(*net)
                                                         : ControllerState{};

    LoopResult res;
    res.traj.push(0.0, x, 0.0, sc.plant);

    for (int k = 0; k < total; ++k) {
        const double t = k * sc.T_ctrl;
        double duty = 0.0;
        switch (kind) {
        case ControllerKind::Expert:
            duty = expert.step(x, sc.y_ref);
            break;
        case ControllerKind::Pi:
            duty = pi_control(x, sc.y_ref, pi, sc.T_ctrl, pi_state);
            break;
        case ControllerKind::Pinn: {
            StepResult r = step(ctl, x, sc.y_ref, *net);
            duty = r.duty;
            ctl = r.state;
            if (r.telemetry.fault) ++res.fault_count;
            res.telemetry.push_back(make_telemetry_row(t, x, r.telemetry));
            break;
        }
        }
        x = advance(x, duty, sc.plant, t, steps_per_ctrl);
        res.traj.push((k + 1) * sc.T_ctrl, x, duty, sc.plant);
    }

    res.metrics = compute_metrics(res.traj, sc.y_ref);
    return res;
}

std::vector<ScenarioConfig> preset_scenarios() {
    std::vector<ScenarioConfig> out;

    ScenarioConfig cpl60;
    cpl60.name = "cpl_60_120_60";
    cpl60.plant.load.kind = LoadKind::ConstantPower;
    cpl60.plant.load.value = 60.0;
    cpl60.plant.load.schedule = {{0.03, 120.0}, {0.07, 60.0}};
    out.push_back(cpl60);

    ScenarioConfig cpl100 = cpl60;
    cpl100.name = "cpl_100_200_100";
    cpl100.plant.load.value = 100.0;
    cpl100.plant.load.schedule = {{0.03, 200.0}, {0.07, 100.0}};
    out.push_back(cpl100);

    ScenarioConfig rdip = cpl60;
    rdip.name = "r_4_2_4";
    rdip.plant.load.kind = LoadKind::Impedance;
    rdip.plant.load.value = 4.0;
    rdip.plant.load.schedule = {{0.03, 2.0}, {0.07, 4.0}};
    out.push_back(rdip);

    return out;
}

} // namespace pinnctl
