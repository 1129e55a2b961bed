#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "advtex/config.hpp"
#include "advtex/dynamics.hpp"
#include "advtex/grid.hpp"
#include "advtex/judge.hpp"
#include "advtex/types.hpp"

namespace advtex {

struct LossReport {
    int iteration = 0;
    double J = 0.0;
    double S = 0.0;
    double cost_sum = 0.0;
    double subtlety_penalty = 0.0;
    std::vector<double> per_step_costs;
    bool judged = true;  // false when S was carried over between judge calls
};

// J = cost_sum / (S + epsilon) + lambda * subtlety.
LossReport compute_loss(const std::vector<double>& costs, double S, double epsilon,
                        double subtlety, double lambda);

// Hinge on perceptual distance between activated textures:
// penalty = max(0, delta_min - D)^2 with D = hsv_distance_mean(act, act_ref).
// When grad is non-null it receives d penalty / d theta (accumulated).
double subtlety_penalty(const Grid3& theta, const Grid3& theta_ref, double delta_min,
                        const HsvWeights& weights, Grid3* grad = nullptr);

struct AdamState {
    Grid3 m;
    Grid3 v;
    long step_count = 0;
};

AdamState make_adam_state(int height, int width, int channels);

// Textbook Adam with bias correction; coordinates set in `freeze` keep theta,
// m, and v bit-identical.
void adam_step(Grid3& theta, const Grid3& grad, AdamState& state, const AdamHyper& hyper,
               const Mask3* freeze = nullptr);

// Everything fixed across one optimization run.
struct OptimizeEnv {
    SceneConfig scene;
    RunConfig run;
    PolicyWeights weights;
    Grid3 theta_ref;  // logit of the reference texture; also the initial theta
    Mask3 freeze_mask;
    int jobs = 1;
};

// Builds policy weights (seeded sub-stream "policy", bias calibrated to zero
// steer on the initial reference frame) and the reference texture from the
// scene (texture_png if given, procedural pattern otherwise).
OptimizeEnv make_optimize_env(const SceneConfig& scene, const RunConfig& run, int jobs = 1);

// Judges the recorded rollout at the configured frame stride against
// same-pose reference renders; returns the aggregate S.
double judge_rollout_scores(const OptimizeEnv& env, const RolloutResult& rec,
                            JudgeBackend& judge,
                            std::vector<std::pair<int, double>>* per_frame = nullptr);

// Full gradient of J at theta with stop-gradient on S. When s_override is set
// the judge is not called and the given S is used (judge_every_n_iters).
std::pair<Grid3, LossReport> loss_gradient(const OptimizeEnv& env, const Grid3& theta,
                                           JudgeBackend& judge,
                                           std::optional<double> s_override = std::nullopt);

// Loss only (no gradient); used for reporting and acceptance checks.
LossReport evaluate_loss(const OptimizeEnv& env, const Grid3& theta, JudgeBackend& judge);

struct OptimizeResult {
    Grid3 theta;
    std::vector<LossReport> reports;
    bool early_stopped = false;
    int iterations_run = 0;
    // Iteration index the returned theta corresponds to (last iterate whose
    // aggregate S met the early-stop floor; equals iterations_run when the
    // run never tripped the floor).
    int returned_iteration = 0;
};

using CheckpointFn = std::function<void(int iteration, const Grid3& theta)>;

OptimizeResult optimize(const OptimizeEnv& env, JudgeBackend& judge,
                        const CheckpointFn& checkpoint = nullptr);

}  // namespace advtex
