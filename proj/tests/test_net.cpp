#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <vector>

#include "pinnctl/net.hpp"
#include "pinnctl/physics.hpp"
#include "pinnctl/rng.hpp"

using namespace pinnctl;

namespace {

/// Euler-consistent sample: targets come from rolling the discrete model
/// with the true parameters, so a network echoing the truth is exactly
/// physics-consistent.
TrainingSample make_sample(int n, Rng& rng) {
    TrainingSample s;
    s.c_true = 1e-3 * rng.uniform(0.8, 1.2);
    s.l_true = 2e-3 * rng.uniform(0.8, 1.2);
    const ThetaEstimate th{s.c_true, s.l_true};
    const auto m = build_ltv(th, 5e-5, 50.0);

    StateVector x{rng.uniform(20.0, 30.0), rng.uniform(3.0, 9.0)};
    const double d = rng.uniform(-8.0, -2.0);
    s.u_prev = rng.uniform(0.3, 0.7);
    s.y_ref = 25.0;
    s.input = {x.v_o - 0.2, x.v_o,  0.2,  x.i_L - 0.1, x.i_L, 0.1,
               25.0 - (x.v_o - 0.2), 25.0 - x.v_o, -0.2, d,     th.C_hat, th.L_hat};

    s.x_target.resize(2 * n);
    s.u_target.resize(n);
    s.d_target.assign(n, d);
    s.load_values.assign(n, 4.0);
    StateVector xi = x;
    for (int i = 0; i < n; ++i) {
        s.u_target[i] = std::clamp(s.u_prev + rng.uniform(-0.05, 0.05), 0.0, 1.0);
        xi = forward_predict(m, xi, s.u_target[i], {d});
        s.x_target[2 * i] = xi.v_o;
        s.x_target[2 * i + 1] = xi.i_L;
    }
    return s;
}

/// Network outputs that echo the sample's ground truth exactly.
OutputSet echo_truth(int n, const TrainingSample& s) {
    OutputSet pred;
    pred.x_hat.resize(n);
    pred.u_hat.resize(n);
    pred.d_hat.resize(n);
    for (int i = 0; i < n; ++i) {
        pred.x_hat[i] = {s.x_target[2 * i], s.x_target[2 * i + 1]};
        pred.u_hat[i] = s.u_target[i];
        pred.d_hat[i] = s.d_target[i];
    }
    pred.theta = {s.c_true, s.l_true};
    return pred;
}

/// Stats with realistic magnitudes so normalized losses are well scaled.
void set_plausible_stats(NetModel& net) {
    const int n = net.horizon;
    for (int i = 0; i < n; ++i) {
        net.norm.output_mean[2 * i] = 25.0;
        net.norm.output_scale[2 * i] = 2.0;
        net.norm.output_mean[2 * i + 1] = 6.0;
        net.norm.output_scale[2 * i + 1] = 2.0;
        net.norm.output_mean[2 * n + i] = 0.5;
        net.norm.output_scale[2 * n + i] = 0.1;
        net.norm.output_mean[3 * n + i] = -5.0;
        net.norm.output_scale[3 * n + i] = 2.0;
    }
    net.norm.output_mean[4 * n] = 1e-3;
    net.norm.output_scale[4 * n] = 2e-4;
    net.norm.output_mean[4 * n + 1] = 2e-3;
    net.norm.output_scale[4 * n + 1] = 4e-4;
    const double means[12] = {25, 25, 0, 6, 6, 0, 0, 0, 0, -5, 1e-3, 2e-3};
    const double scales[12] = {3, 3, 0.5, 2, 2, 0.5, 3, 3, 0.5, 2, 2e-4, 4e-4};
    for (int c = 0; c < 12; ++c) {
        net.norm.input_mean[c] = means[c];
        net.norm.input_scale[c] = scales[c];
    }
}

double eval_loss(const NetModel& net, const TrainingSample& s, const TermWeights& tw,
                 const std::vector<double>* utilde_override = nullptr) {
    const auto pred = forward(net, InputSet::from_array(s.input));
    double total = 0.0;
    if (tw.data != 0.0) total += tw.data * loss_data(net, pred, s);
    if (tw.fwd != 0.0) total += tw.fwd * loss_phy_forward(net, pred, s);
    if (tw.bwd != 0.0) total += tw.bwd * loss_phy_backward(net, pred, s);
    if (tw.ctrl != 0.0) total += tw.ctrl * loss_control(net, pred, s, utilde_override);
    return total;
}

/// Max relative disagreement between two gradient vectors.
double grad_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double na = 0.0, nb = 0.0;
    for (double v : a) na = std::max(na, std::abs(v));
    for (double v : b) nb = std::max(nb, std::abs(v));
    const double norm = std::max({na, nb, 1e-12});
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst / norm;
}

} // namespace

TEST_CASE("zero-weight network emits zero raw outputs and nominal parameters") {
    auto net = make_net({12, 8, 26}, 6);
    set_plausible_stats(net);
    Rng rng(1);
    InputSet s;
    s.v_o = rng.uniform(0.0, 40.0);
    s.i_L = rng.uniform(-5.0, 15.0);
    s.d_prev = -3.0;
    auto out = forward(net, s);
    for (double r : out.raw) {
        CHECK(r == 0.0);
    }
    CHECK(out.theta.C_hat == net.C_nom);
    CHECK(out.theta.L_hat == net.L_nom);
    // affine channels decode to their means
    CHECK(out.x_hat[0].v_o == net.norm.output_mean[0]);
    CHECK(out.u_hat[0] == net.norm.output_mean[12]);
}

TEST_CASE("input at the channel means cascades tanh zeros through the stack") {
    auto net = make_net({12, 16, 16, 26}, 6);
    set_plausible_stats(net);
    init_params(net, 99); // random weights, zero biases
    std::array<double, 12> arr{};
    for (int c = 0; c < 12; ++c) arr[c] = net.norm.input_mean[c];
    auto out = forward(net, InputSet::from_array(arr));
    for (double r : out.raw) {
        CHECK(r == 0.0);
    }
}

TEST_CASE("parameter decode stays positive for extreme raw outputs") {
    auto net = make_net({12, 26}, 6);
    // Drive the theta channels hard through the output biases.
    const std::size_t bias_base = static_cast<std::size_t>(12) * 26;
    net.params[bias_base + 24] = -40.0;
    net.params[bias_base + 25] = 40.0;
    auto out = forward(net, InputSet{});
    CHECK(out.theta.C_hat > 0.0);
    CHECK(out.theta.L_hat > 0.0);
    CHECK(out.raw[24] == -40.0);
}

TEST_CASE("model validation rejects inconsistent shapes") {
    auto net = make_net({12, 8, 26}, 6);
    net.params.pop_back();
    CHECK_THROWS_AS(net.validate(), DimensionMismatch);
    net = make_net({12, 8, 26}, 6);
    net.layer_sizes.back() = 25;
    CHECK_THROWS_AS(net.validate(), DimensionMismatch);
    CHECK_THROWS_AS((void)make_net({12, 8, 27}, 6), DimensionMismatch);
    CHECK_THROWS_AS((void)make_net({11, 8, 26}, 6), DimensionMismatch);
}

TEST_CASE("initialization is deterministic in the seed") {
    auto a = make_net({12, 16, 26}, 6);
    auto b = make_net({12, 16, 26}, 6);
    init_params(a, 7);
    init_params(b, 7);
    CHECK(a.params == b.params);
    init_params(b, 8);
    CHECK(a.params != b.params);
}

TEST_CASE("data loss vanishes on echoed truth and scales quadratically") {
    const int n = 6;
    auto net = make_net({12, 8, 26}, n);
    set_plausible_stats(net);
    Rng rng(3);
    auto s = make_sample(n, rng);
    auto pred = echo_truth(n, s);
    CHECK(loss_data(net, pred, s) == 0.0);

    auto off1 = pred;
    for (int i = 0; i < n; ++i) {
        off1.x_hat[i].v_o += 0.5;
        off1.u_hat[i] += 0.01;
    }
    auto off2 = pred;
    for (int i = 0; i < n; ++i) {
        off2.x_hat[i].v_o += 1.0;
        off2.u_hat[i] += 0.02;
    }
    CHECK(loss_data(net, off2, s) == doctest::Approx(4.0 * loss_data(net, off1, s)));
}

TEST_CASE("single-step data loss matches hand arithmetic at unit scales") {
    const int n = 1;
    auto net = make_net({12, 6}, n); // unit stats from make_net
    Rng rng(5);
    auto s = make_sample(n, rng);
    auto pred = echo_truth(n, s);
    pred.x_hat[0].v_o += 1.0;   // states group: (1^2 + 2^2)/2 = 2.5
    pred.x_hat[0].i_L += 2.0;
    pred.d_hat[0] += 3.0;       // disturbance group: 9
    pred.u_hat[0] += 0.5;       // control group: 0.25
    pred.theta.C_hat += 0.1;    // parameter group: (0.01 + 0.04)/2 = 0.025
    pred.theta.L_hat += 0.2;
    CHECK(loss_data(net, pred, s) == doctest::Approx(11.775));
}

TEST_CASE("forward physics loss vanishes when outputs are exactly consistent") {
    const int n = 6;
    auto net = make_net({12, 8, 26}, n);
    set_plausible_stats(net);
    Rng rng(7);
    auto s = make_sample(n, rng);
    auto pred = echo_truth(n, s);
    CHECK(loss_phy_forward(net, pred, s) < 1e-24);
}

TEST_CASE("true estimates reduce the forward loss to discretization error") {
    // Targets from the fine simulator, outputs echoing truth: the roll term
    // carries only the Euler-vs-RK4 gap, which shrinks linearly in T_ctrl.
    const int n = 6;
    PlantConfig cfg;
    cfg.load.kind = LoadKind::Impedance;
    cfg.load.value = 4.0;

    auto run = [&](double t_ctrl) {
        auto net = make_net({12, 8, 26}, n);
        net.T_ctrl = t_ctrl;
        set_plausible_stats(net);
        const int steps = static_cast<int>(std::round(t_ctrl / cfg.sim_dt));
        StateVector x{24.0, 5.0};
        TrainingSample s;
        s.c_true = cfg.C_true;
        s.l_true = cfg.L_true;
        s.u_prev = 0.5;
        s.y_ref = 25.0;
        s.input = {x.v_o, x.v_o, 0, x.i_L, x.i_L, 0, 1, 1, 0, 0, 1e-3, 2e-3};
        s.x_target.resize(2 * n);
        s.u_target.assign(n, 0.5);
        s.d_target.resize(n);
        StateVector xi = x;
        double t = 0.0;
        for (int i = 0; i < n; ++i) {
            s.d_target[i] = load_current_term(xi, cfg, t);
            xi = advance(xi, 0.5, cfg, t, steps);
            t += t_ctrl;
            s.x_target[2 * i] = xi.v_o;
            s.x_target[2 * i + 1] = xi.i_L;
        }
        auto pred = echo_truth(n, s);
        return loss_phy_forward(net, pred, s);
    };

    const double coarse = run(5e-5);
    const double fine = run(2.5e-5);
    CHECK(coarse > 0.0);
    // Squared error of a first-order gap: halving T divides by about 4.
    CHECK(fine < coarse / 2.5);
}

TEST_CASE("backward loss is zero for Euler-consistent first predictions") {
    const int n = 6;
    auto net = make_net({12, 8, 26}, n);
    set_plausible_stats(net);
    Rng rng(9);
    auto s = make_sample(n, rng);
    auto pred = echo_truth(n, s);
    CHECK(loss_phy_backward(net, pred, s) < 1e-20);

    auto bad = pred;
    bad.theta.C_hat *= 1.1;
    CHECK(loss_phy_backward(net, bad, s) > 0.0);
}

TEST_CASE("control loss collapses to the tracking cost when duties agree") {
    const int n = 6;
    auto net = make_net({12, 8, 26}, n);
    set_plausible_stats(net);
    Rng rng(13);
    auto s = make_sample(n, rng);
    auto pred = echo_truth(n, s);

    // Pin the re-solve to the logged sequence: imitation terms vanish and
    // only J of the network duty on its own roll remains.
    const double with_override = loss_control(net, pred, s, &s.u_target);

    const auto m = build_ltv(pred.theta, net.T_ctrl, net.V_in);
    StateVector xi{s.input[1], s.input[4]};
    std::vector<double> y(n), uh(n, s.u_prev);
    for (int i = 0; i < n; ++i) {
        xi = forward_predict(m, xi, pred.u_hat[i], {pred.d_hat[i]});
        y[i] = xi.v_o;
    }
    const double j = cost_J(y, s.y_ref, pred.u_hat, uh, net.cost_weights);
    CHECK(with_override == doctest::Approx(j).epsilon(1e-12));
}

TEST_CASE("control loss is zero at a fully consistent equilibrium") {
    const int n = 6;
    auto net = make_net({12, 8, 26}, n);
    set_plausible_stats(net);
    TrainingSample s;
    s.c_true = 1e-3;
    s.l_true = 2e-3;
    s.u_prev = 0.5;
    s.y_ref = 25.0;
    s.input = {25.0, 25.0, 0.0, 6.25, 6.25, 0.0, 0.0, 0.0, 0.0, -6.25, 1e-3, 2e-3};
    s.x_target.resize(2 * n);
    s.u_target.assign(n, 0.5);
    s.d_target.assign(n, -6.25);
    for (int i = 0; i < n; ++i) {
        s.x_target[2 * i] = 25.0;
        s.x_target[2 * i + 1] = 6.25;
    }
    auto pred = echo_truth(n, s);
    CHECK(loss_control(net, pred, s) < 1e-12);
}

TEST_CASE("total loss is the documented weighted combination") {
    const int n = 6;
    auto net = make_net({12, 10, 26}, n);
    set_plausible_stats(net);
    init_params(net, 21);
    Rng rng(17);
    auto s = make_sample(n, rng);
    auto pred = forward(net, InputSet::from_array(s.input));

    const double d = loss_data(net, pred, s);
    const double f = loss_phy_forward(net, pred, s);
    const double b = loss_phy_backward(net, pred, s);
    const double c = loss_control(net, pred, s);
    CHECK(d >= 0.0);
    CHECK(f >= 0.0);
    CHECK(b >= 0.0);
    CHECK(c >= 0.0);

    LossWeights w; // 0.6 / 10
    CHECK(total_loss(net, pred, s, w) ==
          doctest::Approx(0.6 * (f + b) + d + 10.0 * c).epsilon(1e-12));
    LossWeights unit{1.0, 1.0};
    CHECK(total_loss(net, pred, s, unit) == doctest::Approx(f + b + d + c));
    LossWeights data_only{0.0, 0.0};
    CHECK(total_loss(net, pred, s, data_only) == doctest::Approx(d));
}

TEST_CASE("backprop loss value agrees with the standalone loss functions") {
    const int n = 6;
    auto net = make_net({12, 12, 26}, n);
    set_plausible_stats(net);
    init_params(net, 31);
    Rng rng(19);
    auto s = make_sample(n, rng);
    auto pred = forward(net, InputSet::from_array(s.input));

    const auto tw = TermWeights::for_total(net.loss_weights);
    auto res = backprop(net, s, tw, ExpertGrad::Analytic);
    CHECK(res.loss == doctest::Approx(total_loss(net, pred, s, net.loss_weights))
                          .epsilon(1e-12));
}

TEST_CASE("zero data residuals give a zero data gradient") {
    const int n = 6;
    auto net = make_net({12, 8, 26}, n);
    Rng rng(23);
    auto s = make_sample(n, rng);
    // Zero network emits channel means; aim the means at the targets.
    for (int i = 0; i < n; ++i) {
        net.norm.output_mean[2 * i] = s.x_target[2 * i];
        net.norm.output_mean[2 * i + 1] = s.x_target[2 * i + 1];
        net.norm.output_mean[2 * n + i] = s.u_target[i];
        net.norm.output_mean[3 * n + i] = s.d_target[i];
    }
    net.C_nom = s.c_true;
    net.L_nom = s.l_true;
    auto res = backprop(net, s, TermWeights{1.0, 0.0, 0.0, 0.0});
    CHECK(res.loss == 0.0);
    for (double g : res.grad) {
        CHECK(g == 0.0);
    }
}

TEST_CASE("analytic gradients match central finite differences per term") {
    const int n = 6;
    Rng rng(101);
    const double eps = 1e-6;

    const TermWeights selections[5] = {{1, 0, 0, 0},
                                       {0, 1, 0, 0},
                                       {0, 0, 1, 0},
                                       {0, 0, 0, 1},
                                       TermWeights::for_total(LossWeights{})};

    for (int trial = 0; trial < 3; ++trial) {
        auto net = make_net({12, 10, 26}, n);
        set_plausible_stats(net);
        init_params(net, 1000 + trial);
        auto s = make_sample(n, rng);

        for (const auto& tw : selections) {
            auto res = backprop(net, s, tw, ExpertGrad::Analytic);
            std::vector<double> fd(net.params.size());
            for (std::size_t k = 0; k < net.params.size(); ++k) {
                const double orig = net.params[k];
                net.params[k] = orig + eps;
                const double up = eval_loss(net, s, tw);
                net.params[k] = orig - eps;
                const double dn = eval_loss(net, s, tw);
                net.params[k] = orig;
                fd[k] = (up - dn) / (2.0 * eps);
            }
            CHECK(grad_rel_err(res.grad, fd) < 1e-4);
        }
    }
}

TEST_CASE("stop-gradient mode differentiates with the re-solve frozen") {
    const int n = 6;
    Rng rng(211);
    auto net = make_net({12, 10, 26}, n);
    set_plausible_stats(net);
    init_params(net, 77);
    auto s = make_sample(n, rng);

    // Freeze the expert sequence at the unperturbed point; finite
    // differences of the frozen objective match the stop-gradient gradient.
    const auto pred0 = forward(net, InputSet::from_array(s.input));
    const auto m0 = build_ltv(pred0.theta, net.T_ctrl, net.V_in);
    const auto ut0 = expert_control(m0, {s.input[1], s.input[4]}, s.y_ref,
                                    {pred0.d_hat[0]}, s.u_prev, net.cost_weights);

    const TermWeights tw{0, 0, 0, 1};
    auto res = backprop(net, s, tw, ExpertGrad::StopGradient);
    const double eps = 1e-6;
    std::vector<double> fd(net.params.size());
    for (std::size_t k = 0; k < net.params.size(); ++k) {
        const double orig = net.params[k];
        net.params[k] = orig + eps;
        const double up = eval_loss(net, s, tw, &ut0);
        net.params[k] = orig - eps;
        const double dn = eval_loss(net, s, tw, &ut0);
        net.params[k] = orig;
        fd[k] = (up - dn) / (2.0 * eps);
    }
    CHECK(grad_rel_err(res.grad, fd) < 1e-4);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    auto net = make_net({12, 32, 32, 26}, 6);
    set_plausible_stats(net);
    init_params(net, 12345);
    net.loss_weights.lambda_phy = 0.6;
    net.loss_weights.lambda_ctrl = 10.0;

    const std::string path = "ckpt_roundtrip_test.json";
    save_checkpoint(net, path);
    auto back = load_checkpoint(path);
    std::remove(path.c_str());

    REQUIRE(back.params.size() == net.params.size());
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        CHECK(back.params[i] == net.params[i]);
    }
    CHECK(back.layer_sizes == net.layer_sizes);
    CHECK(back.norm.input_mean == net.norm.input_mean);
    CHECK(back.norm.input_scale == net.norm.input_scale);
    CHECK(back.norm.output_mean == net.norm.output_mean);
    CHECK(back.norm.output_scale == net.norm.output_scale);
    CHECK(back.norm.output_range == net.norm.output_range);
    CHECK(back.horizon == net.horizon);
    CHECK(back.T_ctrl == net.T_ctrl);
    CHECK(back.loss_weights.lambda_ctrl == net.loss_weights.lambda_ctrl);
    CHECK(back.cost_weights.Q == net.cost_weights.Q);
}

TEST_CASE("loading a missing or wrong-version checkpoint fails loudly") {
    CHECK_THROWS_AS((void)load_checkpoint("no_such_checkpoint.json"), Error);
}
