#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "pinnctl/control.hpp"
#include "pinnctl/errors.hpp"
#include "pinnctl/physics.hpp"
#include "pinnctl/rng.hpp"
#include "pinnctl/sample.hpp"

namespace pinnctl {

/// Weights of the composite training objective:
///   total = lambda_phy * (phy_forward + phy_backward) + data + lambda_ctrl * control
struct LossWeights {
    double lambda_phy = 0.6;
    double lambda_ctrl = 10.0;
};

/// Per-channel affine statistics, computed from the training split only.
/// Inputs are normalized as (x - mean) / scale before entering the network;
/// most outputs decode as mean + scale * raw. Ranges back the percentage-
/// error metric.
struct NormStats {
    std::vector<double> input_mean, input_scale;   // 12 channels
    std::vector<double> output_mean, output_scale; // 4n+2 decoded channels
    std::vector<double> output_range;              // max - min, floored at 1e-9
};

/// The 12-channel controller input vector. Delayed values are one control
/// period old; the y channels are tracking errors (y_ref - v_o); the last
/// three channels recycle the previous disturbance/parameter estimates.
struct InputSet {
    double v_o_del = 0.0;
    double v_o = 0.0;
    double dv_o = 0.0;
    double i_L_del = 0.0;
    double i_L = 0.0;
    double di_L = 0.0;
    double y_del = 0.0;
    double y = 0.0;
    double dy = 0.0;
    double d_prev = 0.0;
    double c_prev = 0.0;
    double l_prev = 0.0;

    static constexpr int kChannels = 12;
    std::array<double, kChannels> to_array() const;
    static InputSet from_array(const std::array<double, kChannels>& a);
};

/// Decoded network outputs over the horizon: predicted states, duty
/// sequence, disturbance sequence, and the parameter estimate held constant
/// across the horizon. `raw` keeps the undecoded channel values.
struct OutputSet {
    std::vector<double> raw;        // 4n+2
    std::vector<StateVector> x_hat; // n entries, (v_o, i_L) at k+1..k+n
    std::vector<double> u_hat;      // n, duty during [k+i-1, k+i)
    std::vector<double> d_hat;      // n, load term over the same intervals
    ThetaEstimate theta;
};

/// Fully connected tanh network plus everything needed to run it: the flat
/// parameter vector, normalization statistics, and the physics metadata the
/// composite losses depend on.
struct NetModel {
    std::vector<int> layer_sizes; // [12, hidden..., 4n+2]
    std::vector<double> params;   // per layer: W row-major (out x in), then b
    NormStats norm;
    int horizon = 6;
    double T_ctrl = 5e-5;
    double V_in = 50.0;
    double C_nom = 1e-3;
    double L_nom = 2e-3;
    LossWeights loss_weights;
    CostWeights cost_weights;

    std::size_t param_count() const;

    /// Throws ConfigError/DimensionMismatch when the layer list, parameter
    /// vector, stats, and horizon disagree.
    void validate() const;
};

/// Network sized for the given layers with zeroed parameters and unit
/// normalization stats (mean 0, scale 1, range 1).
NetModel make_net(const std::vector<int>& layer_sizes, int horizon);

/// Xavier-uniform initialization, deterministic under the seed.
void init_params(NetModel& net, std::uint64_t seed);

/// How loss_control treats the expert re-solve when differentiating:
/// StopGradient freezes the re-solved sequence; Analytic differentiates
/// through the linear solve via expert_sensitivity.
enum class ExpertGrad { StopGradient, Analytic };

struct LossConfig {
    LossWeights weights;
    ExpertGrad expert_grad = ExpertGrad::StopGradient;
};

/// Layer activations kept for backpropagation: a[0] is the normalized input,
/// a.back() the raw output vector.
struct ForwardTrace {
    std::vector<std::vector<double>> a;
};

OutputSet forward(const NetModel& net, const InputSet& s);
OutputSet forward_traced(const NetModel& net, const InputSet& s, ForwardTrace& trace);

/// Mean squared error on normalized channels, summed over the four target
/// groups (states, disturbances, controls, parameters), each averaged within
/// the group.
double loss_data(const NetModel& net, const OutputSet& pred, const TrainingSample& s);

/// Rolls the discrete model from the measured state with the network's own
/// duty/disturbance/parameter outputs and penalizes (truth vs roll) and
/// (roll vs network prediction), averaged over the horizon.
double loss_phy_forward(const NetModel& net, const OutputSet& pred,
                        const TrainingSample& s);

/// Reconstructs the current state from the first predicted state through the
/// inverse model and penalizes the mismatch against the measurement (twice:
/// the paired comparison collapses onto the measurement).
double loss_phy_backward(const NetModel& net, const OutputSet& pred,
                         const TrainingSample& s);

/// Imitation plus optimality: re-solves the expert on the network's
/// estimated model, penalizes (logged expert vs re-solve) and (re-solve vs
/// network duty), and adds the tracking cost of the network's duty sequence
/// on its own rolled predictions. `utilde_override`, when given, replaces
/// the internal re-solve (used to pin the sequence in oracle tests).
double loss_control(const NetModel& net, const OutputSet& pred, const TrainingSample& s,
                    const std::vector<double>* utilde_override = nullptr);

double total_loss(const NetModel& net, const OutputSet& pred, const TrainingSample& s,
                  const LossWeights& w);

/// Per-term weights for gradient evaluation; total_loss corresponds to
/// (data=1, fwd=lambda_phy, bwd=lambda_phy, ctrl=lambda_ctrl).
struct TermWeights {
    double data = 1.0;
    double fwd = 0.0;
    double bwd = 0.0;
    double ctrl = 0.0;

    static TermWeights for_total(const LossWeights& w) {
        return {1.0, w.lambda_phy, w.lambda_phy, w.lambda_ctrl};
    }
};

struct GradResult {
    double loss = 0.0;          // weighted combination per TermWeights
    std::vector<double> grad;   // d loss / d params, flat layout
};

/// Analytic gradient of the weighted loss combination for one sample.
GradResult backprop(const NetModel& net, const TrainingSample& s, const TermWeights& tw,
                    ExpertGrad expert_grad = ExpertGrad::StopGradient);

/// Versioned JSON checkpoint; load(save(net)) is bit-exact.
void save_checkpoint(const NetModel& net, const std::string& path);
NetModel load_checkpoint(const std::string& path);

} // namespace pinnctl
