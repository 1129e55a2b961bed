#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "advtex/errors.hpp"
#include "advtex/image_io.hpp"
#include "advtex/loss.hpp"
#include "advtex/render.hpp"
#include "advtex/rng.hpp"
#include "doctest.h"

using namespace advtex;

namespace {

// Small scene that keeps rollouts and finite differences fast.
SceneConfig tiny_scene() {
    SceneConfig s;
    s.image_height = 16;
    s.image_width = 16;
    s.camera_focal_px = 16.0;
    s.camera_cx = 8.0;
    s.camera_cy = 8.0;
    s.texture_height = 4;
    s.texture_width = 4;
    s.horizon = 4;
    s.object_x = 8.0;
    s.object_y = 1.0;
    s.object_width = 3.0;
    s.object_height = 2.5;
    s.policy_gain = 8.0;
    return s;
}

// Judge that replays a fixed score sequence, one entry per call, then
// repeats the last entry.
class ScriptedJudge final : public JudgeBackend {
public:
    explicit ScriptedJudge(std::vector<double> scores) : scores_(std::move(scores)) {}
    JudgeVerdict judge_frame(const ImageFrame&, const JudgeContext&) override {
        const size_t i = std::min(calls_++, scores_.size() - 1);
        return {scores_[i], "", std::nullopt};
    }
    std::string name() const override { return "scripted"; }
    size_t calls() const { return calls_; }

private:
    std::vector<double> scores_;
    size_t calls_ = 0;
};

// Judge that throws on selected calls and returns a constant otherwise.
class FlakyJudge final : public JudgeBackend {
public:
    FlakyJudge(double value, std::vector<bool> fail) : value_(value), fail_(std::move(fail)) {}
    JudgeVerdict judge_frame(const ImageFrame&, const JudgeContext&) override {
        const size_t i = calls_++;
        if (i < fail_.size() && fail_[i]) throw JudgeError("scripted failure");
        return {value_, "", std::nullopt};
    }
    std::string name() const override { return "flaky"; }
    size_t calls() const { return calls_; }

private:
    double value_;
    std::vector<bool> fail_;
    size_t calls_ = 0;
};

}  // namespace

TEST_CASE("loss combines cost, realism, and subtlety per the formula") {
    const std::vector<double> costs{1.0, 2.0, 3.0};
    LossReport rep = compute_loss(costs, 0.5, 1e-3, 0.04, 2.0);
    CHECK(rep.cost_sum == 6.0);
    CHECK(rep.S == 0.5);
    CHECK(rep.subtlety_penalty == 0.04);
    CHECK(rep.J == doctest::Approx(6.0 / 0.501 + 0.08).epsilon(1e-14));
    CHECK(rep.per_step_costs == costs);

    CHECK_THROWS_WITH_AS(compute_loss(costs, 0.5, 0.0, 0.0, 1.0), "epsilon must be > 0",
                         ValidationError);
    CHECK_THROWS_AS(compute_loss(costs, 1.5, 1e-3, 0.0, 1.0), ValidationError);
    CHECK_THROWS_AS(compute_loss({-1.0}, 0.5, 1e-3, 0.0, 1.0), ValidationError);
}

TEST_CASE("cost sum is compensated against rounding") {
    // plain left-to-right addition would lose both unit costs here
    LossReport rep = compute_loss({1e16, 1.0, 1.0}, 1.0, 1e-3, 0.0, 0.0);
    CHECK(rep.cost_sum == 1e16 + 2.0);
}

TEST_CASE("loss is strictly decreasing in realism and finite at zero") {
    const std::vector<double> costs{0.5, 0.25};
    double prev = compute_loss(costs, 0.0, 1e-3, 0.01, 1.0).J;
    CHECK(std::isfinite(prev));
    for (int k = 1; k <= 10; ++k) {
        const double J = compute_loss(costs, k / 10.0, 1e-3, 0.01, 1.0).J;
        CHECK(J < prev);
        prev = J;
    }
}

TEST_CASE("subtlety penalty is the squared hinge on texture distance") {
    const Grid3 ref_act = reference_texture(4, 4);
    const Grid3 theta_ref = texture_logit(ref_act);
    const HsvWeights weights;

    // identical textures sit at the hinge maximum
    CHECK(subtlety_penalty(theta_ref, theta_ref, 0.02, weights) ==
          doctest::Approx(0.02 * 0.02).epsilon(1e-13));

    // gradient at zero distance uses the subgradient 0 at the kink
    Grid3 grad(4, 4, 3);
    subtlety_penalty(theta_ref, theta_ref, 0.02, weights, &grad);
    for (size_t i = 0; i < grad.size(); ++i) CHECK(grad[i] == 0.0);

    // far-apart textures clear the hinge entirely
    Grid3 theta_far = theta_ref;
    for (size_t i = 0; i < theta_far.size(); ++i) theta_far[i] += 3.0;
    CHECK(subtlety_penalty(theta_far, theta_ref, 0.02, weights) == 0.0);

    Grid3 wrong(3, 3, 3);
    CHECK_THROWS_AS(subtlety_penalty(wrong, theta_ref, 0.02, weights), ValidationError);
}

TEST_CASE("subtlety gradient matches finite differences inside the hinge") {
    const Grid3 theta_ref = texture_logit(reference_texture(4, 4));
    SplitRng rng(7);
    Grid3 theta = theta_ref;
    for (size_t i = 0; i < theta.size(); ++i) theta[i] += 0.05 * rng.next_normal();

    const HsvWeights weights;
    const double delta_min = 0.5;  // wide hinge keeps the penalty active
    Grid3 grad(4, 4, 3);
    const double penalty = subtlety_penalty(theta, theta_ref, delta_min, weights, &grad);
    REQUIRE(penalty > 0.0);

    const double h = 1e-6;
    int checked = 0;
    for (size_t i = 0; i < theta.size(); ++i) {
        Grid3 plus = theta;
        Grid3 minus = theta;
        plus[i] += h;
        minus[i] -= h;
        const double fd = (subtlety_penalty(plus, theta_ref, delta_min, weights) -
                           subtlety_penalty(minus, theta_ref, delta_min, weights)) /
                          (2.0 * h);
        const double denom = std::max({std::fabs(fd), std::fabs(grad[i]), 1e-8});
        CHECK(std::fabs(fd - grad[i]) / denom < 1e-4);
        if (std::fabs(grad[i]) > 1e-10) ++checked;
    }
    CHECK(checked >= 20);
}

TEST_CASE("adam first step has the textbook closed form") {
    Grid3 theta(2, 2, 1, 1.0);
    Grid3 grad(2, 2, 1);
    grad[0] = 0.5;
    grad[1] = -2.0;
    grad[2] = 0.0;
    grad[3] = 1e-9;
    AdamState state = make_adam_state(2, 2, 1);
    AdamHyper hyper;

    adam_step(theta, grad, state, hyper);
    CHECK(state.step_count == 1);
    for (size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i];
        // bias correction makes mhat = g and vhat = g^2 on the first step
        const double expect = 1.0 - hyper.step * g / (std::fabs(g) + hyper.eps);
        CHECK(theta[i] == doctest::Approx(expect).epsilon(1e-15));
    }

    Grid3 bad(3, 3, 1);
    CHECK_THROWS_AS(adam_step(theta, bad, state, hyper), ValidationError);
}

TEST_CASE("frozen coordinates stay bit-identical across many adam steps") {
    const int H = 8, W = 8, C = 3;
    Grid3 theta(H, W, C);
    SplitRng init(3);
    for (size_t i = 0; i < theta.size(); ++i) theta[i] = init.next_normal();
    const Grid3 original = theta;

    Mask3 freeze(H, W, C);
    for (size_t i = 0; i < freeze.size(); i += 2) freeze.set(i, true);

    AdamState state = make_adam_state(H, W, C);
    AdamHyper hyper;
    SplitRng rng(11);
    for (int step = 0; step < 500; ++step) {
        Grid3 grad(H, W, C);
        for (size_t i = 0; i < grad.size(); ++i) grad[i] = rng.next_normal();
        adam_step(theta, grad, state, hyper, &freeze);
    }

    size_t moved = 0;
    for (size_t i = 0; i < theta.size(); ++i) {
        if (freeze.get(i)) {
            CHECK(theta[i] == original[i]);
            CHECK(state.m[i] == 0.0);
            CHECK(state.v[i] == 0.0);
        } else if (theta[i] != original[i]) {
            ++moved;
        }
    }
    CHECK(moved == theta.size() / 2);
}

TEST_CASE("optimize env builds the reference texture and calibrated policy") {
    SceneConfig scene = tiny_scene();
    RunConfig run;
    run.seed = 5;
    OptimizeEnv env = make_optimize_env(scene, run);

    CHECK(env.theta_ref == texture_logit(reference_texture(4, 4)));
    CHECK(env.freeze_mask.count() == 0);
    CHECK(env.freeze_mask.size() == 4 * 4 * 3);

    // calibration pins the first reference frame to exactly zero steer
    DownsamplePlan plan = make_downsample_plan(scene.image_height, scene.image_width,
                                               env.weights.input_height, env.weights.input_width);
    VehicleState start{scene.ego_x, scene.ego_y, scene.ego_heading, scene.ego_speed};
    ImageFrame first = render(scene, start, env.theta_ref);
    PolicyTape tape;
    CHECK(policy(first, env.weights, plan, &tape).steer == 0.0);
    CHECK(tape.z == 0.0);
}

TEST_CASE("optimize env loads texture and freeze mask images") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "advtex_loss_env";
    fs::create_directories(dir);

    // values on the 8-bit lattice survive the png round trip exactly
    ImageFrame tex(4, 4);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            for (int ch = 0; ch < 3; ++ch)
                tex.pixels.at(r, c, ch) = (10.0 + 20.0 * ((r + c + ch) % 10)) / 255.0;
    const std::string tex_path = (dir / "tex.png").string();
    write_png(tex, tex_path);

    Mask3 mask(4, 4, 1);
    mask.set(0, 0, 0, true);
    mask.set(2, 3, 0, true);
    const std::string mask_path = (dir / "freeze.png").string();
    write_mask_png(mask, mask_path);

    SceneConfig scene = tiny_scene();
    scene.texture_png = tex_path;
    scene.freeze_mask_png = mask_path;
    RunConfig run;
    OptimizeEnv env = make_optimize_env(scene, run);

    CHECK(env.theta_ref == texture_logit(tex.pixels));
    // each set mask pixel freezes all three channels of its texel
    CHECK(env.freeze_mask.count() == 6);
    CHECK(env.freeze_mask.at(0, 0, 0));
    CHECK(env.freeze_mask.at(0, 0, 2));
    CHECK(env.freeze_mask.at(2, 3, 1));
    CHECK_FALSE(env.freeze_mask.at(1, 1, 0));

    SceneConfig wrong = scene;
    wrong.texture_height = 8;
    wrong.texture_width = 8;
    CHECK_THROWS_AS(make_optimize_env(wrong, run), ValidationError);

    fs::remove_all(dir);
}

TEST_CASE("rollout judging renders same-pose references and aggregates") {
    SceneConfig scene = tiny_scene();
    scene.horizon = 12;
    RunConfig run;
    run.judge_stride = 7;
    OptimizeEnv env = make_optimize_env(scene, run);

    RolloutResult rec = rollout(scene, env.theta_ref, env.weights, false);

    // identical texture: every judged frame matches its reference exactly
    HsvJudge hsv;
    std::vector<std::pair<int, double>> per_frame;
    const double S = judge_rollout_scores(env, rec, hsv, &per_frame);
    CHECK(S == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(per_frame.size() == 2);
    CHECK(per_frame[0].first == 0);
    CHECK(per_frame[1].first == 7);

    ConstJudge fixed(0.7);
    CHECK(judge_rollout_scores(env, rec, fixed) == doctest::Approx(0.7).epsilon(1e-15));

    // manual recomputation of the aggregate from per-frame judging
    double manual = 0.0;
    for (int t = 0; t <= scene.horizon; t += run.judge_stride) {
        const ImageFrame reference = render(scene, rec.trajectory.states[t], env.theta_ref);
        manual += hsv_similarity_judge(rec.frames[t], reference, {}, &rec.object_masks[t]).score;
    }
    manual /= 2.0;
    CHECK(S == doctest::Approx(manual).epsilon(1e-13));
}

TEST_CASE("loss gradient matches finite differences of the full objective") {
    SceneConfig scene = tiny_scene();
    RunConfig run;
    run.subtlety_weight = 0.7;
    run.subtlety_delta_min = 0.5;  // keep the hinge active at this theta
    run.judge_stride = 2;
    OptimizeEnv env = make_optimize_env(scene, run);

    SplitRng rng(13);
    Grid3 theta = env.theta_ref;
    for (size_t i = 0; i < theta.size(); ++i) theta[i] += 0.1 * rng.next_normal();

    ConstJudge judge(1.0);  // realism is stop-gradient, so pin it
    auto [grad, report] = loss_gradient(env, theta, judge);
    CHECK(report.judged);
    CHECK(report.S == 1.0);
    CHECK(report.J ==
          doctest::Approx(evaluate_loss(env, theta, judge).J).epsilon(1e-13));

    const double h = 1e-5;
    int checked = 0, nonzero = 0;
    for (size_t i = 0; i < theta.size(); ++i) {
        Grid3 plus = theta;
        Grid3 minus = theta;
        plus[i] += h;
        minus[i] -= h;
        const double fd =
            (evaluate_loss(env, plus, judge).J - evaluate_loss(env, minus, judge).J) / (2.0 * h);
        const double denom = std::max({std::fabs(fd), std::fabs(grad[i]), 1e-6});
        CHECK(std::fabs(fd - grad[i]) / denom < 1e-3);
        ++checked;
        if (std::fabs(grad[i]) > 1e-8) ++nonzero;
    }
    CHECK(checked == 48);
    CHECK(nonzero >= 20);
}

TEST_CASE("realism scaling divides the cost gradient by S plus epsilon") {
    SceneConfig scene = tiny_scene();
    RunConfig run;
    run.subtlety_weight = 0.0;  // isolate the cost path
    OptimizeEnv env = make_optimize_env(scene, run);

    SplitRng rng(17);
    Grid3 theta = env.theta_ref;
    for (size_t i = 0; i < theta.size(); ++i) theta[i] += 0.1 * rng.next_normal();

    ConstJudge half(0.5);
    ConstJudge full(1.0);
    auto [g_half, rep_half] = loss_gradient(env, theta, half);
    auto [g_full, rep_full] = loss_gradient(env, theta, full);
    const double ratio = (1.0 + env.run.epsilon) / (0.5 + env.run.epsilon);
    for (size_t i = 0; i < g_half.size(); ++i)
        CHECK(g_half[i] == doctest::Approx(g_full[i] * ratio).epsilon(1e-12));
    CHECK(rep_half.cost_sum == rep_full.cost_sum);
}

TEST_CASE("frozen coordinates receive zero gradient") {
    SceneConfig scene = tiny_scene();
    RunConfig run;
    OptimizeEnv env = make_optimize_env(scene, run);
    for (size_t i = 0; i < env.freeze_mask.size(); i += 3) env.freeze_mask.set(i, true);

    SplitRng rng(19);
    Grid3 theta = env.theta_ref;
    for (size_t i = 0; i < theta.size(); ++i) theta[i] += 0.1 * rng.next_normal();

    ConstJudge judge(1.0);
    auto [grad, report] = loss_gradient(env, theta, judge);
    for (size_t i = 0; i < grad.size(); ++i)
        if (env.freeze_mask.get(i)) CHECK(grad[i] == 0.0);
}

TEST_CASE("optimization is deterministic run to run") {
    SceneConfig scene = tiny_scene();
    RunConfig run;
    run.iterations = 5;
    run.checkpoint_every = 0;
    OptimizeEnv env = make_optimize_env(scene, run);

    ConstJudge j1(1.0), j2(1.0);
    OptimizeResult a = optimize(env, j1);
    OptimizeResult b = optimize(env, j2);
    REQUIRE(a.reports.size() == b.reports.size());
    for (size_t i = 0; i < a.reports.size(); ++i) {
        CHECK(a.reports[i].J == b.reports[i].J);
        CHECK(a.reports[i].cost_sum == b.reports[i].cost_sum);
    }
    CHECK(a.theta == b.theta);
    CHECK(a.iterations_run == 5);
    CHECK(a.returned_iteration == 5);
    CHECK_FALSE(a.early_stopped);
}

TEST_CASE("early stop reverts to the last iterate above the realism floor") {
    SceneConfig scene = tiny_scene();
    RunConfig run;
    run.iterations = 10;
    run.checkpoint_every = 0;
    run.early_stop_s_floor = 0.2;
    run.early_stop_patience = 3;
    run.judge_stride = scene.horizon + 1;  // judge only frame 0: one call per iteration
    OptimizeEnv env = make_optimize_env(scene, run);

    ScriptedJudge drops({0.9, 0.5, 0.15, 0.1, 0.1});
    OptimizeResult result = optimize(env, drops);
    CHECK(result.early_stopped);
    CHECK(result.iterations_run == 5);
    CHECK(result.returned_iteration == 1);
    REQUIRE(result.reports.size() == 5);
    CHECK(result.reports[1].S == 0.5);
    CHECK(result.reports[4].S == 0.1);

    // the reverted texture is the iterate a one-step run would produce
    RunConfig run1 = run;
    run1.iterations = 1;
    OptimizeEnv env1 = make_optimize_env(scene, run1);
    ScriptedJudge first({0.9});
    OptimizeResult one = optimize(env1, first);
    CHECK(result.theta == one.theta);
}

TEST_CASE("judge cadence carries the last score between calls") {
    SceneConfig scene = tiny_scene();
    RunConfig run;
    run.iterations = 7;
    run.checkpoint_every = 0;
    run.judge_every_n_iters = 3;
    run.judge_stride = scene.horizon + 1;
    OptimizeEnv env = make_optimize_env(scene, run);

    ScriptedJudge judge({0.9, 0.8, 0.7});
    OptimizeResult result = optimize(env, judge);
    CHECK(judge.calls() == 3);  // iterations 0, 3, 6
    REQUIRE(result.reports.size() == 7);
    CHECK(result.reports[0].judged);
    CHECK_FALSE(result.reports[1].judged);
    CHECK(result.reports[1].S == result.reports[0].S);
    CHECK(result.reports[2].S == result.reports[0].S);
    CHECK(result.reports[3].judged);
    CHECK(result.reports[3].S == 0.8);
    CHECK(result.reports[6].S == 0.7);
}

TEST_CASE("judge failures abort by default and carry the last score on request") {
    SceneConfig scene = tiny_scene();
    RunConfig run;
    run.iterations = 4;
    run.checkpoint_every = 0;
    run.judge_stride = scene.horizon + 1;
    OptimizeEnv env = make_optimize_env(scene, run);

    {
        FlakyJudge judge(0.9, {false, true});
        CHECK_THROWS_AS(optimize(env, judge), JudgeError);
    }
    {
        env.run.judge.failure_fallback = "last";
        FlakyJudge judge(0.9, {false, true, false, false});
        OptimizeResult result = optimize(env, judge);
        REQUIRE(result.reports.size() == 4);
        CHECK(result.reports[0].S == 0.9);
        CHECK(result.reports[1].S == 0.9);  // substituted
        CHECK_FALSE(result.reports[1].judged);
        CHECK(result.reports[2].judged);
    }
    {
        // no successful score yet: nothing to fall back on
        env.run.judge.failure_fallback = "last";
        FlakyJudge judge(0.9, {true});
        CHECK_THROWS_AS(optimize(env, judge), JudgeError);
    }
}

TEST_CASE("checkpoint callback fires on the configured cadence plus the result") {
    SceneConfig scene = tiny_scene();
    RunConfig run;
    run.iterations = 5;
    run.checkpoint_every = 2;
    OptimizeEnv env = make_optimize_env(scene, run);

    std::vector<int> seen;
    ConstJudge judge(1.0);
    optimize(env, judge, [&](int iteration, const Grid3&) { seen.push_back(iteration); });
    CHECK(seen == std::vector<int>{0, 2, 4, 5});
}
