#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>

#include "pinnctl/training.hpp"

using namespace pinnctl;

namespace {

DatasetSpec small_spec(std::size_t count, int variants = 1) {
    DatasetSpec spec;
    spec.count = count;
    spec.variants_per_case = variants;
    spec.seed = 7;
    return spec;
}

// Worst relative state error when the simulator is rolled from the sample's
// measured state under the logged duties and per-interval load values.
double replay_error(const TrainingSample& s, const Dataset& ds) {
    PlantConfig cfg;
    cfg.V_in = ds.V_in;
    cfg.L_N = ds.L_N;
    cfg.C_N = ds.C_N;
    cfg.C_true = s.c_true;
    cfg.L_true = s.l_true;
    cfg.sim_dt = ds.sim_dt;
    cfg.load.kind = s.load_kind == 1 ? LoadKind::ConstantPower : LoadKind::Impedance;
    const int steps = static_cast<int>(std::llround(ds.T_ctrl / ds.sim_dt));

    StateVector x{s.input[1], s.input[4]};
    double worst = 0.0;
    for (int j = 0; j < ds.horizon; ++j) {
        cfg.load.value = s.load_values[j];
        x = advance(x, s.u_target[j], cfg, 0.0, steps);
        const double tv = s.x_target[2 * j];
        const double ti = s.x_target[2 * j + 1];
        worst = std::max(worst, std::abs(x.v_o - tv) / std::max(std::abs(tv), 1e-6));
        worst = std::max(worst, std::abs(x.i_L - ti) / std::max(std::abs(ti), 1e-6));
    }
    return worst;
}

bool samples_identical(const TrainingSample& a, const TrainingSample& b) {
    auto eq = [](const std::vector<double>& x, const std::vector<double>& y) {
        return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * 8) == 0;
    };
    return std::memcmp(a.input.data(), b.input.data(), sizeof a.input) == 0 &&
           eq(a.x_target, b.x_target) && eq(a.u_target, b.u_target) &&
           eq(a.d_target, b.d_target) && eq(a.load_values, b.load_values) &&
           a.c_true == b.c_true && a.l_true == b.l_true && a.u_prev == b.u_prev &&
           a.y_ref == b.y_ref && a.t == b.t && a.scenario_id == b.scenario_id &&
           a.load_kind == b.load_kind;
}

} // namespace

TEST_CASE("full-scale dataset has the documented count, split, and warm-up") {
    DatasetSpec spec;
    const Dataset ds = generate_dataset(spec);
    CHECK(ds.samples.size() == 18000);
    CHECK(ds.train_count == 13500);

    std::set<int> train_scen, val_scen;
    std::vector<double> first_t(18, 1e9);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const TrainingSample& s = ds.samples[i];
        (i < ds.train_count ? train_scen : val_scen).insert(s.scenario_id);
        first_t[s.scenario_id] = std::min(first_t[s.scenario_id], s.t);
        REQUIRE(s.x_target.size() == 12);
        REQUIRE(s.u_target.size() == 6);
        REQUIRE(s.d_target.size() == 6);
        for (double u : s.u_target) {
            REQUIRE(u >= 0.0);
            REQUIRE(u <= 1.0);
        }
        REQUIRE(std::isfinite(s.input[1]));
        REQUIRE((s.load_kind == 0 || s.load_kind == 1));
    }
    // Every scenario reaches both splits, and the first 9 control steps of
    // every run were discarded (first kept sample sits at index 10).
    CHECK(train_scen.size() == 18);
    CHECK(val_scen.size() == 18);
    for (double t : first_t) CHECK(t == doctest::Approx(10 * ds.T_ctrl).epsilon(1e-12));
}

TEST_CASE("dataset generation is byte-stable in the seed") {
    const Dataset a = generate_dataset(small_spec(360));
    const Dataset b = generate_dataset(small_spec(360));
    REQUIRE(a.samples.size() == 360);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i)
        REQUIRE(samples_identical(a.samples[i], b.samples[i]));

    DatasetSpec other = small_spec(360);
    other.seed = 8;
    const Dataset c = generate_dataset(other);
    bool any_diff = false;
    for (std::size_t i = 0; i < c.samples.size() && !any_diff; ++i)
        any_diff = !samples_identical(a.samples[i], c.samples[i]);
    CHECK(any_diff);
}

TEST_CASE("dataset spec validation") {
    CHECK_THROWS_AS(generate_dataset([] {
                        DatasetSpec s;
                        s.variants_per_case = 0; // no scenarios at all
                        return s;
                    }()),
                    ConfigError);
    CHECK_THROWS_AS(generate_dataset([] {
                        DatasetSpec s;
                        s.count = 0;
                        return s;
                    }()),
                    ConfigError);
    CHECK_THROWS_AS(generate_dataset([] {
                        DatasetSpec s;
                        s.split_fraction = 0.0;
                        return s;
                    }()),
                    ConfigError);
    CHECK_THROWS_AS(generate_dataset([] {
                        DatasetSpec s;
                        s.param_spread = 1.0;
                        return s;
                    }()),
                    ConfigError);
    CHECK_THROWS_AS(generate_dataset([] {
                        DatasetSpec s;
                        s.T_ctrl = 5.0000003e-5; // not a multiple of sim_dt
                        return s;
                    }()),
                    ConfigError);
}

TEST_CASE("every sample replays through the simulator") {
    const Dataset ds = generate_dataset(small_spec(720));
    for (const TrainingSample& s : ds.samples) REQUIRE(replay_error(s, ds) < 1e-9);
}

TEST_CASE("dataset CSV round-trip is bit-exact") {
    const Dataset ds = generate_dataset(small_spec(240, 1));
    const std::string path = "test_dataset_io.csv";
    write_dataset_csv(ds, path);

    const Dataset back = load_dataset_csv(path);
    CHECK(back.train_count == ds.train_count);
    CHECK(back.horizon == ds.horizon);
    CHECK(back.T_ctrl == ds.T_ctrl);
    CHECK(back.sim_dt == ds.sim_dt);
    CHECK(back.V_in == ds.V_in);
    CHECK(back.C_N == ds.C_N);
    CHECK(back.L_N == ds.L_N);
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        REQUIRE(samples_identical(ds.samples[i], back.samples[i]));

    CHECK_THROWS_AS(load_dataset_csv("no_such_dataset.csv"), ConfigError);

    // Corrupt the metadata version and expect rejection.
    {
        std::ofstream meta(path + ".meta.json", std::ios::trunc);
        meta << "{\"version\": 99}\n";
    }
    CHECK_THROWS_AS(load_dataset_csv(path), ConfigError);
    std::remove(path.c_str());
    std::remove((path + ".meta.json").c_str());
}

TEST_CASE("normalization statistics ignore the validation split") {
    Dataset ds = generate_dataset(small_spec(400));
    REQUIRE(ds.train_count < ds.samples.size());
    const NormStats before = compute_norm_stats(ds);

    for (std::size_t i = ds.train_count; i < ds.samples.size(); ++i) {
        for (double& v : ds.samples[i].x_target) v *= 3.0;
        for (double& v : ds.samples[i].u_target) v += 0.25;
        ds.samples[i].c_true *= 2.0;
        for (double& v : ds.samples[i].input) v += 1.0;
    }
    const NormStats after = compute_norm_stats(ds);
    CHECK(before.input_mean == after.input_mean);
    CHECK(before.input_scale == after.input_scale);
    CHECK(before.output_mean == after.output_mean);
    CHECK(before.output_scale == after.output_scale);
    CHECK(before.output_range == after.output_range);
}

TEST_CASE("normalization statistics match hand arithmetic") {
    Dataset ds;
    ds.horizon = 1;
    ds.train_count = 2;
    TrainingSample a, b;
    a.input.fill(1.0);
    b.input.fill(3.0);
    a.x_target = {10.0, 2.0};
    b.x_target = {14.0, 6.0};
    a.u_target = {0.2};
    b.u_target = {0.6};
    a.d_target = {-4.0};
    b.d_target = {-8.0};
    a.c_true = 1e-3;
    b.c_true = 3e-3;
    a.l_true = 2e-3;
    b.l_true = 2e-3;
    ds.samples = {a, b};

    const NormStats st = compute_norm_stats(ds);
    CHECK(st.input_mean[0] == doctest::Approx(2.0));
    CHECK(st.input_scale[0] == doctest::Approx(1.0)); // population std of {1,3}
    CHECK(st.output_mean[0] == doctest::Approx(12.0));
    CHECK(st.output_scale[0] == doctest::Approx(2.0));
    CHECK(st.output_range[0] == doctest::Approx(4.0));
    CHECK(st.output_mean[2] == doctest::Approx(0.4));  // duty channel
    CHECK(st.output_range[3] == doctest::Approx(4.0)); // disturbance channel
    CHECK(st.output_scale[4] == doctest::Approx(1e-3));
    CHECK(st.output_scale[5] == 1e-9); // zero-variance channel hits the floor
    CHECK(st.output_range[5] == 1e-9);
}

TEST_CASE("percentage error: midpoint predictor scores 50, exact predictor 0") {
    // Two samples whose targets sit symmetrically around a midpoint; a
    // zero-weight network decodes every channel to the stored mean, so its
    // absolute error is exactly half the channel range.
    Dataset ds;
    ds.horizon = 1;
    ds.train_count = 2;
    TrainingSample a, b;
    a.input.fill(0.0);
    b.input.fill(0.0);
    a.x_target = {24.0, 3.0};
    b.x_target = {26.0, 5.0};
    a.u_target = {0.4};
    b.u_target = {0.6};
    a.d_target = {-6.0};
    b.d_target = {-4.0};
    a.c_true = 0.8e-3;
    b.c_true = 1.2e-3;
    a.l_true = 1.5e-3;
    b.l_true = 2.5e-3;
    ds.samples = {a, b};

    NetModel net = make_net({12, 4, 4 * ds.horizon + 2}, ds.horizon);
    net.norm = compute_norm_stats(ds);
    net.C_nom = 1.0e-3; // exp(0) decodes straight to the midpoint
    net.L_nom = 2.0e-3;
    CHECK(percentage_error(net, ds, false) == doctest::Approx(50.0).epsilon(1e-9));

    // Degenerate dataset where the midpoint IS the target: error is zero.
    Dataset same = ds;
    same.samples[1] = same.samples[0];
    same.samples[1].c_true = same.samples[0].c_true;
    NetModel exact = make_net({12, 4, 4 * same.horizon + 2}, same.horizon);
    exact.norm = compute_norm_stats(same);
    exact.C_nom = same.samples[0].c_true;
    exact.L_nom = same.samples[0].l_true;
    CHECK(percentage_error(exact, same, false) == 0.0);

    CHECK_THROWS_AS(percentage_error(net, ds, true), ConfigError); // no validation split
}

TEST_CASE("ten-sample memorization drives the data loss under 1e-4") {
    DatasetSpec spec = small_spec(10, 2);
    spec.split_fraction = 1.0;
    const Dataset ds = generate_dataset(spec);
    REQUIRE(ds.samples.size() == 10);
    REQUIRE(ds.train_count == 10);

    TrainConfig cfg;
    cfg.hidden = {32};
    cfg.iterations = 30000;
    cfg.batch = 10;
    cfg.seed = 3;
    cfg.loss_weights.lambda_phy = 0.0; // pure data fit
    cfg.loss_weights.lambda_ctrl = 0.0;
    const TrainResult r = train(cfg, ds);

    double mean_data = 0.0;
    for (const TrainingSample& s : ds.samples)
        mean_data += loss_data(r.net, forward(r.net, InputSet::from_array(s.input)), s);
    mean_data /= static_cast<double>(ds.samples.size());
    CHECK(mean_data < 1e-4);
}

TEST_CASE("training is deterministic in the seed") {
    const Dataset ds = generate_dataset(small_spec(120));
    TrainConfig cfg;
    cfg.hidden = {8};
    cfg.iterations = 150;
    cfg.batch = 16;
    const TrainResult a = train(cfg, ds);
    const TrainResult b = train(cfg, ds);
    REQUIRE(a.net.params.size() == b.net.params.size());
    CHECK(std::memcmp(a.net.params.data(), b.net.params.data(), a.net.params.size() * 8) == 0);
    REQUIRE(a.log.rows.size() == b.log.rows.size());
    for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
        CHECK(a.log.rows[i].avg_loss == b.log.rows[i].avg_loss);
        CHECK(a.log.rows[i].pct_error == b.log.rows[i].pct_error);
    }
}

TEST_CASE("checkpoint schedule scales with the budget") {
    const Dataset ds = generate_dataset(small_spec(120));
    TrainConfig cfg;
    cfg.hidden = {6};
    cfg.iterations = 300;
    cfg.batch = 8;
    const TrainResult r = train(cfg, ds);
    REQUIRE(r.log.rows.size() == 6);
    const std::size_t expect[] = {10, 50, 150, 200, 250, 300};
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(r.log.rows[i].iteration == expect[i]);
        CHECK(std::isfinite(r.log.rows[i].avg_loss));
        CHECK(r.log.rows[i].avg_loss > 0.0);
    }

    cfg.iterations = 1; // all checkpoints collapse onto the only iteration
    const TrainResult tiny = train(cfg, ds);
    REQUIRE(tiny.log.rows.size() == 1);
    CHECK(tiny.log.rows[0].iteration == 1);
}

TEST_CASE("validation error descends over a real run") {
    const Dataset ds = generate_dataset(small_spec(3600));
    TrainConfig cfg;
    cfg.hidden = {24};
    cfg.iterations = 2500;
    cfg.batch = 64;
    const TrainResult r = train(cfg, ds);
    REQUIRE(r.log.rows.size() >= 2);
    const double initial = r.log.rows.front().pct_error;
    const double final_pct = r.log.rows.back().pct_error;
    CHECK(final_pct < initial);

    // The returned model is the best checkpoint.
    double best = 1e300;
    for (const ConvergenceRow& row : r.log.rows) best = std::min(best, row.pct_error);
    CHECK(percentage_error(r.net, ds, true) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("non-finite loss aborts with the offending iteration") {
    const Dataset ds = generate_dataset(small_spec(60));
    TrainConfig cfg;
    cfg.hidden = {8};
    cfg.iterations = 50;
    cfg.batch = 4;
    cfg.learning_rate = 1e18; // first update catapults the exponential decode
    try {
        train(cfg, ds);
        FAIL("expected NonFiniteLoss");
    } catch (const NonFiniteLoss& e) {
        CHECK(std::string(e.what()).find("iteration") != std::string::npos);
    }
}

TEST_CASE("training configuration validation") {
    const Dataset ds = generate_dataset(small_spec(60));
    TrainConfig cfg;
    cfg.iterations = 0;
    CHECK_THROWS_AS(train(cfg, ds), ConfigError);
    cfg.iterations = 10;
    cfg.batch = 0;
    CHECK_THROWS_AS(train(cfg, ds), ConfigError);
    CHECK_THROWS_AS(train(TrainConfig{}, Dataset{}), ConfigError);
    CHECK_THROWS_AS(compute_norm_stats(Dataset{}), ConfigError);
}

TEST_CASE("architecture sweep: shape, ordering, and CSV") {
    const Dataset ds = generate_dataset(small_spec(2400));
    TrainConfig base;
    base.iterations = 1200;
    base.batch = 64;
    const SweepResult sweep = sweep_architecture({8, 32}, {1, 2}, ds, base);
    REQUIRE(sweep.pct.size() == 2);
    REQUIRE(sweep.pct[0].size() == 2);
    for (const auto& row : sweep.pct)
        for (double v : row) {
            CHECK(std::isfinite(v));
            CHECK(v > 0.0);
        }
    const double best8 = std::min(sweep.pct[0][0], sweep.pct[0][1]);
    const double best32 = std::min(sweep.pct[1][0], sweep.pct[1][1]);
    CHECK(best32 <= best8);

    const std::string path = "test_sweep_io.csv";
    write_sweep_csv(sweep, path);
    std::ifstream in(path);
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header == "neurons,layers_1,layers_2");
    int rows = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
    in.close();
    std::remove(path.c_str());

    CHECK_THROWS_AS(sweep_architecture({}, {1}, ds, base), ConfigError);
}

TEST_CASE("convergence log CSV format") {
    ConvergenceLog log;
    log.rows = {{10, 1.5, 12.0}, {50, 0.75, 6.0}};
    const std::string path = "test_convergence_io.csv";
    write_convergence_csv(log, path);
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "iteration,avg_loss,pct_error");
    REQUIRE(std::getline(in, line));
    CHECK(line == "10,1.5,12");
    REQUIRE(std::getline(in, line));
    CHECK(line == "50,0.75,6");
    in.close();
    std::remove(path.c_str());
}
