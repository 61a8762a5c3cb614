#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ncp/propagation.hpp"
#include "test_util.hpp"

using namespace ncp;

namespace {

Predictor two_head_constant(double acc, double flops) {
    Predictor p(kCodeDims, {"acc", "flops"}, 0);
    ncp_test::zero_weights(p);
    p.branches()[0].b3 = acc;
    p.branches()[1].b3 = flops;
    return p;
}

} // namespace

TEST_CASE("lambda profiles") {
    CHECK(lambda_profile("S") == 0.7);
    CHECK(lambda_profile("M") == 0.3);
    CHECK(lambda_profile("L") == 0.1);
    CHECK_THROWS_AS(lambda_profile("XL"), ValidationError);
}

TEST_CASE("targets offset the current prediction by +1/-1") {
    // Constant predictor: p_acc = 78.3, p_flops = 36.2. The first-iteration
    // targets are 79.3 / 35.2, so the loss is smoothL1 at distance 1 on both
    // heads: 0.5 + lambda * 0.5. The gradient is zero, so the run converges.
    const Predictor p = two_head_constant(78.3, 36.2);
    PropagationConfig cfg;
    cfg.lambda = 0.5;
    auto [code, trace] = propagate_continuous(p, default_init_code(), cfg);
    REQUIRE(trace.rows.size() == 1);
    CHECK(trace.rows[0].loss == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(trace.rows[0].predictions[0].second == 78.3);
    CHECK(trace.rows[0].predictions[1].second == 36.2);
    CHECK(trace.stop_reason == StopReason::Converged);
    CHECK(code == default_init_code());
}

TEST_CASE("continuous propagation ascends a linear accuracy surface") {
    std::vector<double> w(kCodeDims);
    Rng rng(3);
    for (double& v : w) v = rng.uniform(-0.004, 0.004);
    const Predictor p = ncp_test::linear_predictor(w, 70.0);
    PropagationConfig cfg;
    cfg.lambda = 0.0;  // single head is enough when lambda is zero
    cfg.max_iters = 3;
    const ArchCode init = default_init_code();
    auto [code, trace] = propagate_continuous(p, init, cfg);
    REQUIRE(trace.rows.size() == 3);
    // Each step moves along +w by eta (|p - t| = 1, so |f'| = 1).
    for (int i = 0; i < kCodeDims; ++i) {
        const double step = trace.rows[1].code_raw[i] - trace.rows[0].code_raw[i];
        const double range = bounds(i).max - bounds(i).min;
        CHECK(step == doctest::Approx(cfg.eta * w[i] * range).epsilon(1e-9));
    }
    CHECK(trace.stop_reason == StopReason::MaxIters);
}

TEST_CASE("codes stay inside the box under violent gradients") {
    std::vector<double> w(kCodeDims);
    Rng rng(5);
    for (double& v : w) v = rng.uniform(-50.0, 50.0);
    const Predictor p = ncp_test::linear_predictor(w, 70.0);
    PropagationConfig cfg;
    cfg.lambda = 0.0;
    cfg.max_iters = 20;
    auto [code, trace] = propagate_continuous(p, default_init_code(), cfg);
    for (const TraceRow& row : trace.rows)
        for (int i = 0; i < kCodeDims; ++i) {
            const DimBounds b = bounds(i);
            CHECK(row.code_raw[i] >= b.min - 1e-12);
            CHECK(row.code_raw[i] <= b.max + 1e-12);
        }
    // The returned code is rounded onto the grid.
    CHECK(round_code(code) == round_code(clamp01(code)));
    CHECK_NOTHROW(validate(decode(code)));
}

TEST_CASE("absolute targets already met stop immediately") {
    const Predictor p = two_head_constant(80.0, 2.0);
    PropagationConfig cfg;
    cfg.lambda = 0.5;
    cfg.target_rule = TargetRule::Absolute;
    cfg.acc_target = 80.0;
    cfg.flops_target = 2.0;
    auto [code, trace] = propagate_continuous(p, default_init_code(), cfg);
    CHECK(trace.stop_reason == StopReason::TargetReached);
    CHECK(trace.rows.size() == 1);
    CHECK(trace.rows[0].loss == 0.0);
}

TEST_CASE("missing required heads are configuration errors") {
    std::vector<double> w(kCodeDims, 0.01);
    const Predictor acc_only = ncp_test::linear_predictor(w, 70.0);
    PropagationConfig cfg;
    cfg.lambda = 0.5;
    CHECK_THROWS_WITH_AS(propagate_continuous(acc_only, default_init_code(), cfg),
                         doctest::Contains("FLOPs head"), ValidationError);
    cfg.lambda = 0.0;
    CHECK_NOTHROW(propagate_continuous(acc_only, default_init_code(), cfg));

    const Predictor miou = ncp_test::linear_predictor(w, 70.0, "miou");
    CHECK_THROWS_WITH_AS(propagate_continuous(miou, default_init_code(), cfg),
                         doctest::Contains("accuracy head"), ValidationError);
    cfg.acc_metric = "miou";
    CHECK_NOTHROW(propagate_continuous(miou, default_init_code(), cfg));
}

TEST_CASE("accumulate_gradients") {
    CHECK(accumulate_gradients({{1.0, 2.0}, {3.0, -1.0}}) == std::vector<double>{4.0, 1.0});
    CHECK(accumulate_gradients({{1.5, -2.0}}) == std::vector<double>{1.5, -2.0});
    CHECK(accumulate_gradients({{1.0, 2.0}, {3.0, -1.0}}, {2.0, 0.0}) ==
          std::vector<double>{2.0, 4.0});
    CHECK_THROWS_AS(accumulate_gradients({}), ValidationError);
    CHECK_THROWS_AS(accumulate_gradients({{1.0}, {1.0, 2.0}}), ValidationError);
    CHECK_THROWS_AS(accumulate_gradients({{1.0}}, {1.0, 2.0}), ValidationError);
}

TEST_CASE("two identical tasks with unit weights equal one task at doubled step") {
    std::vector<double> w(kCodeDims);
    Rng rng(7);
    for (double& v : w) v = rng.uniform(-0.05, 0.05);
    const Predictor p = ncp_test::linear_predictor(w, 70.0);
    PropagationConfig cfg;
    cfg.lambda = 0.0;
    cfg.max_iters = 15;
    auto [joint_code, joint_trace] = propagate_multitask({&p, &p}, default_init_code(), cfg);
    PropagationConfig doubled = cfg;
    doubled.eta = 2.0 * cfg.eta;
    auto [single_code, single_trace] = propagate_continuous(p, default_init_code(), doubled);
    CHECK(joint_code == single_code);
    REQUIRE(joint_trace.rows.size() == single_trace.rows.size());
    for (std::size_t r = 0; r < joint_trace.rows.size(); ++r)
        CHECK(joint_trace.rows[r].code_raw == single_trace.rows[r].code_raw);
}

TEST_CASE("zero-weight tasks do not influence the trajectory") {
    std::vector<double> wa(kCodeDims), wb(kCodeDims);
    Rng rng(11);
    for (double& v : wa) v = rng.uniform(-0.05, 0.05);
    for (double& v : wb) v = rng.uniform(-0.05, 0.05);
    const Predictor pa = ncp_test::linear_predictor(wa, 70.0);
    const Predictor pb = ncp_test::linear_predictor(wb, 60.0);
    PropagationConfig cfg;
    cfg.lambda = 0.0;
    cfg.max_iters = 10;
    auto [joint, joint_trace] = propagate_multitask({&pa, &pb}, default_init_code(), cfg, {1.0, 0.0});
    auto [solo, solo_trace] = propagate_continuous(pa, default_init_code(), cfg);
    CHECK(joint == solo);
    for (std::size_t r = 0; r < joint_trace.rows.size(); ++r)
        CHECK(joint_trace.rows[r].code_raw == solo_trace.rows[r].code_raw);
}

TEST_CASE("winner-takes-all choice logic") {
    std::array<int, kCodeDims> raw{};
    for (int i = 0; i < kCodeDims; ++i) raw[i] = dim_kind(i) == DimKind::Count ? 2 : 64;
    std::vector<std::optional<double>> deltas(kCodeDims, 1.0);
    deltas[0] = 2.0;
    std::vector<double> grad(kCodeDims, 0.0);

    // Positive best: g = [0.2, -0.2, 0...] -> decrease dim 0 by its unit.
    grad[0] = 0.4;
    grad[1] = -0.2;
    WtaChoice c = wta_choose(grad, deltas, raw);
    CHECK(c.kind == WtaChoice::Kind::Step);
    CHECK(c.dim == 0);
    CHECK(c.step_raw == -8);

    // All negative: the most negative normalized gradient is increased.
    grad.assign(kCodeDims, -0.1);
    grad[5] = -0.9;  // count dim, delta 1 -> g = -0.9 is the minimum
    c = wta_choose(grad, deltas, raw);
    CHECK(c.kind == WtaChoice::Kind::Step);
    CHECK(c.dim == 5);
    CHECK(c.step_raw == +1);

    // All zero: converged.
    grad.assign(kCodeDims, 0.0);
    c = wta_choose(grad, deltas, raw);
    CHECK(c.kind == WtaChoice::Kind::Converged);

    // Positive gradient at the lower bound cannot step down and is excluded.
    grad.assign(kCodeDims, 0.0);
    grad[3] = 5.0;
    auto floor_raw = raw;
    floor_raw[3] = 1;  // count at its minimum
    c = wta_choose(grad, deltas, floor_raw);
    CHECK(c.kind == WtaChoice::Kind::Converged);  // only zero-gradient dims remain

    // No admissible dimension at all.
    std::vector<std::optional<double>> none(kCodeDims, std::nullopt);
    c = wta_choose(grad, none, raw);
    CHECK(c.kind == WtaChoice::Kind::NoAdmissible);
}

TEST_CASE("winner-takes-all run changes one dimension per iteration and stays on the grid") {
    std::vector<double> w(kCodeDims);
    Rng rng(13);
    for (double& v : w) v = rng.uniform(-0.5, 0.5);
    Predictor p(kCodeDims, {"acc", "flops"}, 17);
    PropagationConfig cfg;
    cfg.strategy = Strategy::WinnerTakesAll;
    cfg.lambda = 0.5;
    cfg.max_iters = 70;
    FlopsTable table(Head::Segmentation, {128, 128, 3, 19});
    auto [code, trace] = propagate_wta(p, default_init_code(), cfg, table);

    REQUIRE(!trace.rows.empty());
    for (std::size_t r = 0; r + 1 < trace.rows.size(); ++r) {
        const TraceRow& cur = trace.rows[r];
        const TraceRow& next = trace.rows[r + 1];
        REQUIRE(cur.chosen_dim >= 0);
        int changed = 0;
        for (int i = 0; i < kCodeDims; ++i) {
            const double diff = next.code_raw[i] - cur.code_raw[i];
            if (diff != 0.0) {
                ++changed;
                CHECK(i == cur.chosen_dim);
                CHECK(diff == cur.chosen_step);
                CHECK(std::abs(diff) == bounds(i).unit);
            }
        }
        CHECK(changed == 1);
        for (int i = 0; i < kCodeDims; ++i) {
            const DimBounds b = bounds(i);
            CHECK(next.code_raw[i] >= b.min);
            CHECK(next.code_raw[i] <= b.max);
            CHECK(std::fmod(next.code_raw[i] - b.min, b.unit) == 0.0);
        }
    }
    CHECK_NOTHROW(validate(decode(code)));
}

TEST_CASE("winner-takes-all stops when no dimension is admissible") {
    // Every dimension at its maximum: no +notch exists anywhere, so no
    // FLOPs delta is available and the very first iteration stops.
    std::vector<double> w(kCodeDims, 0.3);
    const Predictor p = ncp_test::linear_predictor(w, 70.0);
    PropagationConfig cfg;
    cfg.lambda = 0.0;
    ArchCode top;
    for (int i = 0; i < kCodeDims; ++i) top[i] = 1.0;
    FlopsTable table(Head::Segmentation, {64, 64, 3, 19});
    auto [code, trace] = propagate_wta(p, top, cfg, table);
    CHECK(trace.stop_reason == StopReason::NoAdmissibleDim);
    CHECK(trace.rows.size() == 1);
    CHECK(code == top);
}

TEST_CASE("transfer from a fixed point barely moves") {
    // A corner of the box is a fixed point of ascent on a linear surface.
    std::vector<double> w(kCodeDims);
    Rng rng(19);
    for (double& v : w) v = rng.uniform(0.001, 0.01);  // all positive: optimum at the top corner
    const Predictor p = ncp_test::linear_predictor(w, 70.0);
    ArchCode top;
    for (int i = 0; i < kCodeDims; ++i) top[i] = 1.0;
    PropagationConfig cfg;
    cfg.lambda = 0.0;
    auto [code, trace] = transfer(top, p, cfg);
    CHECK(code == top);

    // Transfer is deterministic.
    auto [code2, trace2] = transfer(top, p, cfg);
    CHECK(code == code2);
    REQUIRE(trace.rows.size() == trace2.rows.size());
    for (std::size_t r = 0; r < trace.rows.size(); ++r)
        CHECK(trace.rows[r].code_raw == trace2.rows[r].code_raw);
}

TEST_CASE("one-hot projection") {
    CHECK(project_onehot({0.2, 0.5, 0.3}, {3}) == std::vector<double>{0.0, 1.0, 0.0});
    CHECK(project_onehot({0.9, 0.1, 0.3, 0.8}, {2, 2}) == std::vector<double>{1.0, 0.0, 0.0, 1.0});
    // First index wins ties.
    CHECK(project_onehot({0.5, 0.5}, {2}) == std::vector<double>{1.0, 0.0});
    CHECK_THROWS_AS(project_onehot({0.1, 0.2, 0.3}, {2, 2}), ValidationError);
    CHECK_THROWS_AS(project_onehot({0.1, 0.2}, {2, 0}), ValidationError);
}

TEST_CASE("one-hot propagation flips to the preferred options and stays projected") {
    // 2 groups x 3 options; a linear predictor over the 6 relaxed inputs
    // that dislikes the incumbent options and prefers one challenger per
    // group. Ascent drains the incumbents and the argmax projection flips.
    Predictor p(6, {"acc"}, 23);
    ncp_test::zero_weights(p);
    for (int i = 0; i < 6; ++i) {
        p.w1().row(i)[i] = 1.0;
        p.b1()[static_cast<std::size_t>(i)] = 1.0;
    }
    auto& br = p.branches()[0];
    const std::vector<double> w = {-0.05, 0.06, 0.0, -0.05, 0.0, 0.06};
    double abs_sum = 0.0;
    for (int i = 0; i < 6; ++i) {
        br.w2.row(0)[i] = w[static_cast<std::size_t>(i)];
        abs_sum += std::abs(w[static_cast<std::size_t>(i)]);
    }
    br.b2[0] = 4.0 * abs_sum + 1.0;
    br.w3[0] = 1.0;

    PropagationConfig cfg;
    cfg.lambda = 0.0;
    cfg.eta = 1.0;
    cfg.max_iters = 30;
    cfg.onehot_project_every = 10;
    const std::vector<double> init = {1.0, 0.0, 0.0, 1.0, 0.0, 0.0};
    auto [code, trace] = propagate_onehot(p, init, {3, 3}, cfg);
    CHECK(code == std::vector<double>{0.0, 1.0, 0.0, 0.0, 0.0, 1.0});
    CHECK(trace.rows.size() == 30);

    CHECK_THROWS_AS(propagate_onehot(p, {1.0, 0.0}, {3, 3}, cfg), ValidationError);
}

TEST_CASE("trace CSV has the documented columns") {
    const Predictor p = two_head_constant(78.3, 36.2);
    PropagationConfig cfg;
    cfg.lambda = 0.5;
    auto [code, trace] = propagate_continuous(p, default_init_code(), cfg);
    std::ostringstream os;
    trace.write_csv(os);
    const std::string csv = os.str();
    CHECK(csv.rfind("iter,e_0,e_1,", 0) == 0);
    CHECK(csv.find(",acc,flops,loss,grad_norm,chosen_dim,chosen_step,stop_reason") != std::string::npos);
    CHECK(csv.find("Converged") != std::string::npos);
}
