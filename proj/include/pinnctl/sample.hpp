#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace pinnctl {

/// One supervised example at control-period spacing. The input array follows
/// the InputSet channel order; targets cover the n future steps. u holds the
/// duty applied during [k+i-1, k+i); d holds the plant's load current term at
/// the start of the same interval; x holds the simulated state at k+i.
struct TrainingSample {
    std::array<double, 12> input{};
    std::vector<double> x_target; // 2n, (v_o, i_L) pairs
    std::vector<double> u_target; // n
    std::vector<double> d_target; // n
    double c_true = 0.0; // [F]
    double l_true = 0.0; // [H]

    // Context needed to re-solve the expert and replay the simulation.
    double u_prev = 0.0;  // duty applied during [k-1, k)
    double y_ref = 0.0;   // [V]
    double t = 0.0;       // time at index k [s]
    int scenario_id = 0;
    int load_kind = 0;                // 0 impedance, 1 constant power
    std::vector<double> load_values;  // n, load value during [k+i-1, k+i)
};

/// Samples plus the generation-time constants shared by every sample. The
/// first train_count samples form the training split; the rest validate.
struct Dataset {
    std::vector<TrainingSample> samples;
    std::size_t train_count = 0;
    int horizon = 6;
    double T_ctrl = 5e-5;
    double sim_dt = 1e-6;
    double V_in = 50.0;
    double C_N = 1e-3;
    double L_N = 2e-3;
};

} // namespace pinnctl
