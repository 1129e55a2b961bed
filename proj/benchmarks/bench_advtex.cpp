#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>
#include <string>

#include "advtex/dynamics.hpp"
#include "advtex/judge.hpp"
#include "advtex/loss.hpp"
#include "advtex/render.hpp"
#include "advtex/rng.hpp"

using namespace advtex;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Pose right in front of the billboard so the texture dominates the frame:
// the worst case for the rasterizer and the adjoint.
VehicleState near_pose() { return {20.0, 0.3, 0.05, 5.0}; }

void bm_render(benchmark::State& state) {
    const SceneConfig scene;
    const Grid3 theta = texture_logit(reference_texture(scene.texture_height, scene.texture_width));
    const VehicleState pose = near_pose();
    for (auto _ : state) {
        ImageFrame frame = render(scene, pose, theta);
        benchmark::DoNotOptimize(frame.pixels.data());
    }
}
BENCHMARK(bm_render);

void bm_render_with_tape(benchmark::State& state) {
    const SceneConfig scene;
    const Grid3 theta = texture_logit(reference_texture(scene.texture_height, scene.texture_width));
    const VehicleState pose = near_pose();
    for (auto _ : state) {
        RenderTape tape;
        ImageFrame frame = render(scene, pose, theta, &tape);
        benchmark::DoNotOptimize(tape.samples.data());
        benchmark::DoNotOptimize(frame.pixels.data());
    }
}
BENCHMARK(bm_render_with_tape);

void bm_backprop_frame(benchmark::State& state) {
    const SceneConfig scene;
    const Grid3 theta = texture_logit(reference_texture(scene.texture_height, scene.texture_width));
    RenderTape tape;
    render(scene, near_pose(), theta, &tape);
    SplitRng rng(1);
    Grid3 adjoint(scene.image_height, scene.image_width, 3);
    for (size_t i = 0; i < adjoint.size(); ++i) adjoint[i] = rng.next_double() - 0.5;
    for (auto _ : state) {
        Grid3 dtheta(scene.texture_height, scene.texture_width, 3);
        backprop_frame(tape, adjoint, dtheta);
        benchmark::DoNotOptimize(dtheta.data());
    }
}
BENCHMARK(bm_backprop_frame);

void bm_rollout(benchmark::State& state) {
    const SceneConfig scene;
    const RunConfig run;
    const OptimizeEnv env = make_optimize_env(scene, run);
    for (auto _ : state) {
        RolloutResult rec = rollout(scene, env.theta_ref, env.weights, true);
        benchmark::DoNotOptimize(rec.cost_sum);
    }
}
BENCHMARK(bm_rollout);

void bm_loss_gradient(benchmark::State& state) {
    const SceneConfig scene;
    const RunConfig run;
    const OptimizeEnv env = make_optimize_env(scene, run);
    ConstJudge judge(1.0);
    for (auto _ : state) {
        auto [grad, report] = loss_gradient(env, env.theta_ref, judge);
        benchmark::DoNotOptimize(grad.data());
        benchmark::DoNotOptimize(report.J);
    }
}
BENCHMARK(bm_loss_gradient);

void bm_hsv_distance(benchmark::State& state) {
    SplitRng rng(2);
    Grid3 a(64, 64, 3), b(64, 64, 3);
    for (size_t i = 0; i < a.size(); ++i) a[i] = rng.next_double();
    for (size_t i = 0; i < b.size(); ++i) b[i] = rng.next_double();
    const HsvWeights weights;
    for (auto _ : state) {
        double d = hsv_distance_mean(a, b, weights);
        benchmark::DoNotOptimize(d);
    }
}
BENCHMARK(bm_hsv_distance);

void bm_parse_vlm_response(benchmark::State& state) {
    const std::string text =
        read_file(std::string(ADVTEX_DATA_DIR) + "/transcripts/gpt4_image1.txt");
    for (auto _ : state) {
        auto score = parse_vlm_response(text);
        benchmark::DoNotOptimize(score);
    }
}
BENCHMARK(bm_parse_vlm_response);

void bm_adam_step(benchmark::State& state) {
    SplitRng rng(3);
    Grid3 theta(16, 16, 3);
    Grid3 grad(16, 16, 3);
    for (size_t i = 0; i < grad.size(); ++i) grad[i] = rng.next_double() - 0.5;
    AdamState adam = make_adam_state(16, 16, 3);
    const AdamHyper hyper;
    for (auto _ : state) {
        adam_step(theta, grad, adam, hyper);
        benchmark::DoNotOptimize(theta.data());
    }
}
BENCHMARK(bm_adam_step);

}  // namespace

BENCHMARK_MAIN();
