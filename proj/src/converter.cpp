#include "pinnctl/converter.hpp"

#include <cmath>

#include "pinnctl/csv.hpp"

namespace pinnctl {

double LoadDescriptor::value_at(double t) const {
    double v = value;
    for (const auto& [when, next] : schedule) {
        if (t >= when) {
            v = next;
        } else {
            break;
        }
    }
    return v;
}

void LoadDescriptor::validate() const {
    auto check_value = [&](double v) {
        if (kind == LoadKind::Impedance && !(v > 0.0)) {
            throw ConfigError("impedance load must be > 0 ohm, got " + std::to_string(v));
        }
        if (kind == LoadKind::ConstantPower && v < 0.0) {
            throw ConfigError("CPL power must be >= 0 W, got " + std::to_string(v));
        }
    };
    check_value(value);
    double prev = -1.0;
    bool first = true;
    for (const auto& [when, next] : schedule) {
        if (!first && !(when > prev)) {
            throw ConfigError("load schedule times must be strictly increasing");
        }
        first = false;
        prev = when;
        check_value(next);
    }
}

void PlantConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) {
            throw ConfigError(std::string(name) + " must be > 0");
        }
    };
    positive(V_in, "V_in");
    positive(L_N, "L_N");
    positive(C_N, "C_N");
    positive(L_true, "L_true");
    positive(C_true, "C_true");
    positive(sim_dt, "sim_dt");
    positive(v_floor, "v_floor");
    load.validate();
}

namespace {

double load_term(const StateVector& state, const PlantConfig& cfg, double load_value) {
    if (cfg.load.kind == LoadKind::Impedance) {
        return -state.v_o / load_value;
    }
    if (state.v_o < cfg.v_floor) {
        throw DegenerateVoltage("CPL load with v_o = " + std::to_string(state.v_o) +
                                " V below floor " + std::to_string(cfg.v_floor) + " V");
    }
    return -load_value / state.v_o;
}

Derivatives rhs(const StateVector& state, double duty, const PlantConfig& cfg,
                double load_value) {
    Derivatives d;
    d.di_L_dt = (-state.v_o + cfg.V_in * duty) / cfg.L_true;
    d.dv_o_dt = (state.i_L + load_term(state, cfg, load_value)) / cfg.C_true;
    return d;
}

} // namespace

double eta1(double di_L_dt, const PlantConfig& cfg) {
    return -cfg.dL() * di_L_dt;
}

double eta2(const StateVector& state, double dv_o_dt, const PlantConfig& cfg, double t) {
    return load_term(state, cfg, cfg.load.value_at(t)) - cfg.dC() * dv_o_dt;
}

double load_current_term(const StateVector& state, const PlantConfig& cfg, double t) {
    return load_term(state, cfg, cfg.load.value_at(t));
}

Derivatives derivatives(const StateVector& state, double duty, const PlantConfig& cfg,
                        double t) {
    if (!(duty >= 0.0 && duty <= 1.0)) {
        throw InvalidDuty("duty " + std::to_string(duty) + " outside [0, 1]");
    }
    return rhs(state, duty, cfg, cfg.load.value_at(t));
}

StateVector integrate_step(const StateVector& state, double duty, const PlantConfig& cfg,
                           double t) {
    if (!(duty >= 0.0 && duty <= 1.0)) {
        throw InvalidDuty("duty " + std::to_string(duty) + " outside [0, 1]");
    }
    // Load held over the step: switches snap to the integration grid.
    const double lv = cfg.load.value_at(t);
    const double h = cfg.sim_dt;

    const Derivatives k1 = rhs(state, duty, cfg, lv);
    const StateVector s2{state.v_o + 0.5 * h * k1.dv_o_dt, state.i_L + 0.5 * h * k1.di_L_dt};
    const Derivatives k2 = rhs(s2, duty, cfg, lv);
    const StateVector s3{state.v_o + 0.5 * h * k2.dv_o_dt, state.i_L + 0.5 * h * k2.di_L_dt};
    const Derivatives k3 = rhs(s3, duty, cfg, lv);
    const StateVector s4{state.v_o + h * k3.dv_o_dt, state.i_L + h * k3.di_L_dt};
    const Derivatives k4 = rhs(s4, duty, cfg, lv);

    StateVector out;
    out.v_o = state.v_o + h / 6.0 * (k1.dv_o_dt + 2.0 * k2.dv_o_dt + 2.0 * k3.dv_o_dt + k4.dv_o_dt);
    out.i_L = state.i_L + h / 6.0 * (k1.di_L_dt + 2.0 * k2.di_L_dt + 2.0 * k3.di_L_dt + k4.di_L_dt);

    if (!std::isfinite(out.v_o) || !std::isfinite(out.i_L)) {
        throw NonFiniteState("state became non-finite at t = " + std::to_string(t));
    }
    if (cfg.load.kind == LoadKind::ConstantPower && out.v_o < cfg.v_floor) {
        throw DegenerateVoltage("CPL collapse: v_o = " + std::to_string(out.v_o) +
                                " V at t = " + std::to_string(t + h));
    }
    return out;
}

StateVector advance(StateVector state, double duty, const PlantConfig& cfg, double t,
                    int n_steps) {
    for (int i = 0; i < n_steps; ++i) {
        state = integrate_step(state, duty, cfg, t + i * cfg.sim_dt);
    }
    return state;
}

void Trajectory::push(double time, const StateVector& x, double u, const PlantConfig& cfg) {
    t.push_back(time);
    v_o.push_back(x.v_o);
    i_L.push_back(x.i_L);
    duty.push_back(u);
    load_value.push_back(cfg.load.value_at(time));
    load_kind.push_back(cfg.load.kind == LoadKind::Impedance ? 0 : 1);
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    CsvWriter csv(path);
    csv.header({"t", "v_o", "i_L", "duty", "load_value", "load_kind"});
    for (std::size_t i = 0; i < traj.size(); ++i) {
        csv.row({traj.t[i], traj.v_o[i], traj.i_L[i], traj.duty[i], traj.load_value[i],
                 static_cast<double>(traj.load_kind[i])});
    }
    csv.commit();
}

} // namespace pinnctl
