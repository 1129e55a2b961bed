#include <cmath>
#include <numbers>
#include <vector>

#include "advtex/config.hpp"
#include "advtex/dynamics.hpp"
#include "advtex/errors.hpp"
#include "advtex/render.hpp"
#include "advtex/rng.hpp"
#include "doctest.h"

using namespace advtex;

namespace {

// Small scene that keeps FD rollouts cheap but the billboard in view.
SceneConfig tiny_scene() {
    SceneConfig scene;
    scene.image_height = 16;
    scene.image_width = 16;
    scene.camera_focal_px = 16.0;
    scene.camera_cx = 8.0;
    scene.camera_cy = 8.0;
    scene.texture_height = 4;
    scene.texture_width = 4;
    scene.horizon = 6;
    scene.object_x = 8.0;
    scene.object_y = 1.0;
    scene.object_width = 3.0;
    scene.object_height = 2.5;
    scene.validate();
    return scene;
}

PolicyWeights seeded_weights(const SceneConfig& scene, uint64_t seed = 0) {
    SplitRng rng = SplitRng(seed).split("policy");
    return make_policy_weights(scene, rng);
}

}  // namespace

TEST_CASE("downsample plan covers each cell with weights summing to one") {
    DownsamplePlan plan = make_downsample_plan(64, 64, 16, 16);
    REQUIRE(plan.cells.size() == 256);
    for (const auto& cell : plan.cells) {
        double sum = 0.0;
        for (const auto& t : cell) {
            CHECK(t.weight > 0.0);
            sum += t.weight;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    // integer ratio: every cell is a clean 4x4 block of weight 1/16
    for (const auto& cell : plan.cells) {
        CHECK(cell.size() == 16);
        for (const auto& t : cell) CHECK(t.weight == doctest::Approx(1.0 / 16).epsilon(1e-12));
    }
}

TEST_CASE("downsample plan splits pixels fractionally at non-integer ratios") {
    // 3 -> 2: each cell spans 1.5 pixels; the middle pixel is shared half-half
    DownsamplePlan plan = make_downsample_plan(3, 3, 2, 2);
    const auto& cell = plan.cells[0];  // covers [0,1.5) x [0,1.5)
    double total = 0.0;
    double middle_weight = 0.0;
    for (const auto& t : cell) {
        total += t.weight;
        if (t.row == 1 && t.col == 1) middle_weight = t.weight;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // overlap of [0,1.5)^2 with pixel [1,2)^2 is 0.25 of the 2.25 cell area
    CHECK(middle_weight == doctest::Approx(0.25 / 2.25).epsilon(1e-12));
    CHECK_THROWS_AS(make_downsample_plan(8, 8, 16, 16), ValidationError);
}

TEST_CASE("policy features average grayscale exactly") {
    ImageFrame frame(2, 2);
    // grays: (0.3, 0.6, 0.9, 0.0) via distinct channels
    frame.pixels.at(0, 0, 0) = 0.3;
    frame.pixels.at(0, 0, 1) = 0.3;
    frame.pixels.at(0, 0, 2) = 0.3;
    frame.pixels.at(0, 1, 0) = 0.0;
    frame.pixels.at(0, 1, 1) = 0.9;
    frame.pixels.at(0, 1, 2) = 0.9;  // gray 0.6
    frame.pixels.at(1, 0, 0) = 0.9;
    frame.pixels.at(1, 0, 1) = 0.9;
    frame.pixels.at(1, 0, 2) = 0.9;
    // (1,1) stays 0
    DownsamplePlan plan = make_downsample_plan(2, 2, 1, 1);
    std::vector<double> g = policy_features(frame, plan);
    REQUIRE(g.size() == 1);
    CHECK(g[0] == doctest::Approx((0.3 + 0.6 + 0.9 + 0.0) / 4).epsilon(1e-12));

    ImageFrame wrong(3, 3);
    CHECK_THROWS_AS(policy_features(wrong, plan), ValidationError);
}

TEST_CASE("policy weights are seeded deterministically and scaled by cell count") {
    SceneConfig scene;
    PolicyWeights a = seeded_weights(scene, 0);
    PolicyWeights b = seeded_weights(scene, 0);
    CHECK(a.w == b.w);
    PolicyWeights c = seeded_weights(scene, 1);
    CHECK(a.w != c.w);
    CHECK(a.gain == scene.policy_gain);
    CHECK(a.u_max == scene.policy_u_max);
    REQUIRE(a.w.size() == 256);
    // 1/256-scaled standard normals: sample std should sit near 1/256
    double sq = 0.0;
    for (double v : a.w) sq += v * v * 256.0 * 256.0;
    CHECK(std::sqrt(sq / 256.0) == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("bias calibration zeroes the steer on the calibration frame exactly") {
    SceneConfig scene;
    PolicyWeights pw = seeded_weights(scene);
    DownsamplePlan plan = make_downsample_plan(scene.image_height, scene.image_width,
                                               pw.input_height, pw.input_width);
    Grid3 theta = texture_logit(reference_texture(scene.texture_height, scene.texture_width));
    ImageFrame frame = render(scene, VehicleState(0, 0, 0, 5), theta);
    calibrate_bias(pw, frame, plan);
    PolicyTape tape;
    Control u = policy(frame, pw, plan, &tape);
    CHECK(tape.z == 0.0);
    CHECK(u.steer == 0.0);
}

TEST_CASE("steer saturates inside [-u_max, u_max]") {
    SceneConfig scene;
    PolicyWeights pw = seeded_weights(scene);
    pw.gain = 1e6;  // force saturation
    pw.bias = 5.0;
    DownsamplePlan plan = make_downsample_plan(scene.image_height, scene.image_width,
                                               pw.input_height, pw.input_width);
    ImageFrame bright(scene.image_height, scene.image_width, 1.0);
    Control u = policy(bright, pw, plan);
    CHECK(std::abs(u.steer) <= pw.u_max);
    CHECK(std::abs(u.steer) == doctest::Approx(pw.u_max).epsilon(1e-9));
}

TEST_CASE("policy adjoint matches finite differences over frame pixels") {
    SceneConfig scene = tiny_scene();
    PolicyWeights pw;
    pw.input_height = 4;
    pw.input_width = 4;
    SplitRng rng = SplitRng(5).split("policy");
    pw.w.resize(16);
    for (double& v : pw.w) v = rng.next_normal() / 16.0;
    pw.gain = 3.0;
    pw.u_max = 1.5;
    pw.bias = 0.01;

    DownsamplePlan plan = make_downsample_plan(scene.image_height, scene.image_width, 4, 4);
    ImageFrame frame(scene.image_height, scene.image_width, 0.5);
    for (size_t i = 0; i < frame.pixels.size(); ++i)
        frame.pixels[i] = 0.25 + 0.5 * ((i * 37) % 97) / 96.0;

    PolicyTape tape;
    policy(frame, pw, plan, &tape);
    Grid3 adjoint(scene.image_height, scene.image_width, 3, 0.0);
    policy_backprop(pw, plan, tape, 1.0, adjoint);

    const double step = 1e-6;
    SplitRng pick(6);
    for (int k = 0; k < 40; ++k) {
        size_t i = pick.next_below(static_cast<uint32_t>(frame.pixels.size()));
        ImageFrame hi = frame, lo = frame;
        hi.pixels[i] += step;
        lo.pixels[i] -= step;
        const double fd = (policy(hi, pw, plan).steer - policy(lo, pw, plan).steer) / (2 * step);
        CHECK(adjoint[i] == doctest::Approx(fd).epsilon(1e-5).scale(1.0 + std::abs(fd)));
    }
}

TEST_CASE("step updates heading before position") {
    VehicleState s(1.0, 2.0, 0.5, 4.0);
    Control u{0.3};
    const double dt = 0.125;
    VehicleState n = step(s, u, dt);
    const double h2 = 0.5 + 0.3 * 0.125;
    CHECK(n.heading == doctest::Approx(h2).epsilon(1e-15));
    CHECK(n.x == doctest::Approx(1.0 + 4.0 * std::cos(h2) * 0.125).epsilon(1e-15));
    CHECK(n.y == doctest::Approx(2.0 + 4.0 * std::sin(h2) * 0.125).epsilon(1e-15));
    CHECK(n.speed == 4.0);
    CHECK_THROWS_AS(step(s, u, 0.0), ValidationError);
}

TEST_CASE("constant steer traces the discrete arc closed form") {
    const double v = 5.0, u = 0.4, dt = 0.1;
    const int n = 25;
    VehicleState s(0, 0, 0, v);
    for (int k = 0; k < n; ++k) s = step(s, Control{u}, dt);

    // x_n = v dt sum_{k=1..n} cos(k u dt); Lagrange trig identity
    const double phi = u * dt;
    const double sum_cos =
        std::sin(n * phi / 2.0) * std::cos((n + 1) * phi / 2.0) / std::sin(phi / 2.0);
    const double sum_sin =
        std::sin(n * phi / 2.0) * std::sin((n + 1) * phi / 2.0) / std::sin(phi / 2.0);
    CHECK(s.x == doctest::Approx(v * dt * sum_cos).epsilon(1e-9));
    CHECK(s.y == doctest::Approx(v * dt * sum_sin).epsilon(1e-9));
    CHECK(s.heading == doctest::Approx(n * phi).epsilon(1e-9));
}

TEST_CASE("cost is squared lateral distance to the adversarial target") {
    SceneConfig scene;
    scene.target_offset = 2.5;
    CHECK(cost(VehicleState(3, 0, 0, 5), scene) == 6.25);
    CHECK(cost(VehicleState(3, 2.5, 0, 5), scene) == 0.0);
    CHECK(cost(VehicleState(3, 4.0, 0, 5), scene) == doctest::Approx(2.25).epsilon(1e-15));
}

TEST_CASE("rollout records the documented shapes and is consistent") {
    SceneConfig scene = tiny_scene();
    PolicyWeights pw;
    pw.input_height = 4;
    pw.input_width = 4;
    SplitRng rng = SplitRng(0).split("policy");
    pw.w.resize(16);
    for (double& v : pw.w) v = rng.next_normal() / 16.0;
    pw.gain = scene.policy_gain;
    pw.u_max = scene.policy_u_max;

    Grid3 theta = texture_logit(reference_texture(4, 4));
    RolloutResult rec = rollout(scene, theta, pw, true);

    const int T = scene.horizon;
    CHECK(rec.trajectory.states.size() == static_cast<size_t>(T + 1));
    CHECK(rec.trajectory.controls.size() == static_cast<size_t>(T));
    CHECK(rec.frames.size() == static_cast<size_t>(T + 1));
    CHECK(rec.object_masks.size() == static_cast<size_t>(T + 1));
    CHECK(rec.tapes.size() == static_cast<size_t>(T + 1));
    CHECK(rec.policy_tapes.size() == static_cast<size_t>(T));
    CHECK(rec.per_step_costs.size() == static_cast<size_t>(T + 1));

    double total = 0.0;
    for (double c : rec.per_step_costs) total += c;
    CHECK(rec.cost_sum == doctest::Approx(total).epsilon(1e-15));

    // trajectory-consistency constraint: each transition satisfies the
    // dynamics exactly, bit for bit
    for (int t = 0; t < T; ++t) {
        VehicleState expect = step(rec.trajectory.states[t], rec.trajectory.controls[t], scene.dt);
        CHECK(rec.trajectory.states[t + 1] == expect);
    }

    // judge-only rollouts drop only the adjoint tapes
    RolloutResult lean = rollout(scene, theta, pw, false);
    CHECK(lean.tapes.empty());
    CHECK(lean.policy_tapes.size() == static_cast<size_t>(T));
    CHECK(lean.frames.size() == rec.frames.size());
    CHECK(lean.object_masks.size() == rec.object_masks.size());
    CHECK(lean.trajectory.states == rec.trajectory.states);
    for (size_t i = 0; i < lean.frames.size(); ++i) CHECK(lean.frames[i] == rec.frames[i]);
}

TEST_CASE("rollout cost gradient matches finite differences through the full chain") {
    SceneConfig scene = tiny_scene();
    PolicyWeights pw;
    pw.input_height = 4;
    pw.input_width = 4;
    SplitRng rng = SplitRng(0).split("policy");
    pw.w.resize(16);
    for (double& v : pw.w) v = rng.next_normal() / 16.0;
    pw.gain = 8.0;  // strong enough that the texture matters
    pw.u_max = 1.5;

    Grid3 theta = texture_logit(reference_texture(4, 4));
    RolloutResult rec = rollout(scene, theta, pw, true);
    Grid3 grad = rollout_cost_gradient(scene, pw, rec);

    auto cost_of = [&](const Grid3& th) {
        return rollout(scene, th, pw, false).cost_sum;
    };

    const double step_size = 1e-5;
    SplitRng pick(9);
    int checked = 0;
    for (int k = 0; k < 24; ++k) {
        size_t i = pick.next_below(static_cast<uint32_t>(theta.size()));
        Grid3 hi = theta, lo = theta;
        hi[i] += step_size;
        lo[i] -= step_size;
        const double fd = (cost_of(hi) - cost_of(lo)) / (2 * step_size);
        const double an = grad[i];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
        CHECK(std::abs(fd - an) / denom < 1e-3);
        ++checked;
    }
    CHECK(checked >= 20);
    CHECK(grad.all_finite());
}

TEST_CASE("rollouts are bit-identical across repeat runs") {
    SceneConfig scene = tiny_scene();
    SplitRng rng = SplitRng(3).split("policy");
    PolicyWeights pw;
    pw.input_height = 4;
    pw.input_width = 4;
    pw.w.resize(16);
    for (double& v : pw.w) v = rng.next_normal() / 16.0;
    pw.gain = scene.policy_gain;
    pw.u_max = scene.policy_u_max;
    Grid3 theta = texture_logit(reference_texture(4, 4));

    RolloutResult a = rollout(scene, theta, pw, false);
    RolloutResult b = rollout(scene, theta, pw, false);
    CHECK(a.cost_sum == b.cost_sum);
    CHECK(a.trajectory.states == b.trajectory.states);
    for (size_t t = 0; t < a.trajectory.controls.size(); ++t)
        CHECK(a.trajectory.controls[t].steer == b.trajectory.controls[t].steer);
}
