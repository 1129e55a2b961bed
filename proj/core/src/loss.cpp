#include "advtex/loss.hpp"

#include <algorithm>
#include <cmath>

#include "advtex/color.hpp"
#include "advtex/errors.hpp"
#include "advtex/image_io.hpp"
#include "advtex/parallel.hpp"
#include "advtex/render.hpp"
#include "advtex/rng.hpp"

namespace advtex {

LossReport compute_loss(const std::vector<double>& costs, double S, double epsilon,
                        double subtlety, double lambda) {
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
    if (!(S >= 0.0 && S <= 1.0)) throw ValidationError("S must be in [0,1]");
    LossReport rep;
    rep.per_step_costs = costs;
    double sum = 0.0, comp = 0.0;
    for (double c : costs) {
        if (c < 0.0) throw ValidationError("per-step costs must be >= 0");
        const double y = c - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    rep.cost_sum = sum;
    rep.S = S;
    rep.subtlety_penalty = subtlety;
    rep.J = sum / (S + epsilon) + lambda * subtlety;
    return rep;
}

double subtlety_penalty(const Grid3& theta, const Grid3& theta_ref, double delta_min,
                        const HsvWeights& weights, Grid3* grad) {
    if (!theta.same_shape(theta_ref)) throw ValidationError("texture shapes must match");
    if (theta.channels() != 3) throw ValidationError("texture must have 3 channels");

    const Grid3 act = texture_activation(theta);
    const Grid3 act_ref = texture_activation(theta_ref);
    const double D = hsv_distance_mean(act, act_ref, weights, nullptr);
    const double hinge = std::max(0.0, delta_min - D);
    const double penalty = hinge * hinge;
    if (!grad || hinge == 0.0) return penalty;

    if (!grad->same_shape(theta)) throw ValidationError("gradient shape must match texture");

    const double wsum = weights.h + weights.s + weights.v;
    const double wh = weights.h / wsum;
    const double ws = weights.s / wsum;
    const double wv = weights.v / wsum;
    const double n = static_cast<double>(theta.height()) * theta.width();
    // d penalty / d D = -2 * hinge; D = mean of per-texel distances.
    const double dpen_dd = -2.0 * hinge / n;

    for (int r = 0; r < theta.height(); ++r) {
        for (int c = 0; c < theta.width(); ++c) {
            HsvJacobian jac;
            const Hsv pa = rgb_to_hsv(act.at(r, c, 0), act.at(r, c, 1), act.at(r, c, 2), &jac);
            const Hsv pb = rgb_to_hsv(act_ref.at(r, c, 0), act_ref.at(r, c, 1), act_ref.at(r, c, 2));
            const double dh = circular_hue_delta(pa.h, pb.h) / 180.0;
            const double dsat = pa.s - pb.s;
            const double dval = pa.v - pb.v;
            const double d = std::sqrt(wh * dh * dh + ws * dsat * dsat + wv * dval * dval);
            if (d < 1e-12) continue;  // kink at zero distance: subgradient 0
            const double dh_sign = circular_hue_delta_dh1(pa.h, pb.h) / 180.0;
            // d d / d (h1, s1, v1)
            const double dd_dh = wh * dh * dh_sign / d;
            const double dd_ds = ws * dsat / d;
            const double dd_dv = wv * dval / d;
            for (int ch = 0; ch < 3; ++ch) {
                const double dd_drgb =
                    dd_dh * jac.dh[ch] + dd_ds * jac.ds[ch] + dd_dv * jac.dv[ch];
                const double a = act.at(r, c, ch);
                grad->at(r, c, ch) += dpen_dd * dd_drgb * a * (1.0 - a);
            }
        }
    }
    return penalty;
}

AdamState make_adam_state(int height, int width, int channels) {
    return AdamState{Grid3(height, width, channels), Grid3(height, width, channels), 0};
}

void adam_step(Grid3& theta, const Grid3& grad, AdamState& state, const AdamHyper& hyper,
               const Mask3* freeze) {
    if (!theta.same_shape(grad) || !theta.same_shape(state.m) || !theta.same_shape(state.v))
        throw ValidationError("adam shapes must match");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(hyper.beta1, t);
    const double bc2 = 1.0 - std::pow(hyper.beta2, t);
    for (size_t i = 0; i < theta.size(); ++i) {
        if (freeze && freeze->get(i)) continue;
        const double g = grad[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        theta[i] -= hyper.step * mhat / (std::sqrt(vhat) + hyper.eps);
    }
}

OptimizeEnv make_optimize_env(const SceneConfig& scene, const RunConfig& run, int jobs) {
    scene.validate();
    run.validate();
    OptimizeEnv env;
    env.scene = scene;
    env.run = run;
    env.jobs = std::max(1, jobs);

    Grid3 ref_activated;
    if (!scene.texture_png.empty()) {
        ImageFrame img = read_png(scene.texture_png);
        if (img.height() != scene.texture_height || img.width() != scene.texture_width)
            throw ValidationError("texture_png dims do not match texture_height/width");
        ref_activated = img.pixels;
    } else {
        ref_activated = reference_texture(scene.texture_height, scene.texture_width);
    }
    env.theta_ref = texture_logit(ref_activated);

    if (!scene.freeze_mask_png.empty()) {
        Mask3 img_mask = read_mask_png(scene.freeze_mask_png);
        if (img_mask.height() != scene.texture_height || img_mask.width() != scene.texture_width)
            throw ValidationError("freeze_mask_png dims do not match texture dims");
        // A set mask pixel freezes all three channels of that texel.
        env.freeze_mask = Mask3(scene.texture_height, scene.texture_width, 3);
        for (int r = 0; r < img_mask.height(); ++r)
            for (int c = 0; c < img_mask.width(); ++c)
                if (img_mask.at(r, c, 0))
                    for (int ch = 0; ch < 3; ++ch) env.freeze_mask.set(r, c, ch, true);
    } else {
        env.freeze_mask = Mask3(scene.texture_height, scene.texture_width, 3);
    }

    SplitRng root(run.seed);
    SplitRng policy_rng = root.split("policy");
    env.weights = make_policy_weights(scene, policy_rng);

    // Zero steer on the initial reference frame anchors the unattacked run.
    DownsamplePlan plan = make_downsample_plan(scene.image_height, scene.image_width,
                                               env.weights.input_height, env.weights.input_width);
    VehicleState start{scene.ego_x, scene.ego_y, scene.ego_heading, scene.ego_speed};
    ImageFrame first = render(scene, start, env.theta_ref);
    calibrate_bias(env.weights, first, plan);
    return env;
}

double judge_rollout_scores(const OptimizeEnv& env, const RolloutResult& rec, JudgeBackend& judge,
                            std::vector<std::pair<int, double>>* per_frame) {
    const int T = env.scene.horizon;
    std::vector<int> ts;
    for (int t = 0; t <= T; t += env.run.judge_stride) ts.push_back(t);

    std::vector<double> scores(ts.size(), 0.0);
    parallel_for(ts.size(), env.jobs, [&](size_t i) {
        const int t = ts[i];
        const ImageFrame reference =
            render(env.scene, rec.trajectory.states[t], env.theta_ref);
        JudgeContext ctx;
        ctx.reference = &reference;
        ctx.object_mask = &rec.object_masks[t];
        ctx.frame_index = t;
        scores[i] = judge.judge_frame(rec.frames[t], ctx).score;
    });

    std::vector<std::pair<int, double>> samples;
    samples.reserve(ts.size());
    for (size_t i = 0; i < ts.size(); ++i) samples.emplace_back(ts[i], scores[i]);
    if (per_frame) *per_frame = samples;
    return aggregate_scores(samples, T, env.run.judge_stride);
}

std::pair<Grid3, LossReport> loss_gradient(const OptimizeEnv& env, const Grid3& theta,
                                           JudgeBackend& judge,
                                           std::optional<double> s_override) {
    RolloutResult rec = rollout(env.scene, theta, env.weights, /*keep_tapes=*/true);

    double S;
    bool judged = !s_override.has_value();
    if (s_override)
        S = *s_override;
    else
        S = judge_rollout_scores(env, rec, judge);

    Grid3 grad = rollout_cost_gradient(env.scene, env.weights, rec);
    const double scale = 1.0 / (S + env.run.epsilon);
    for (size_t i = 0; i < grad.size(); ++i) grad[i] *= scale;

    Grid3 sub_grad(theta.height(), theta.width(), theta.channels());
    const HsvWeights hw{env.run.judge.hsv_weight_h, env.run.judge.hsv_weight_s,
                        env.run.judge.hsv_weight_v};
    const double sub =
        subtlety_penalty(theta, env.theta_ref, env.run.subtlety_delta_min, hw, &sub_grad);
    for (size_t i = 0; i < grad.size(); ++i) grad[i] += env.run.subtlety_weight * sub_grad[i];

    for (size_t i = 0; i < grad.size(); ++i)
        if (env.freeze_mask.get(i)) grad[i] = 0.0;

    LossReport rep =
        compute_loss(rec.per_step_costs, S, env.run.epsilon, sub, env.run.subtlety_weight);
    rep.judged = judged;
    return {std::move(grad), std::move(rep)};
}

LossReport evaluate_loss(const OptimizeEnv& env, const Grid3& theta, JudgeBackend& judge) {
    RolloutResult rec = rollout(env.scene, theta, env.weights, /*keep_tapes=*/false);
    const double S = judge_rollout_scores(env, rec, judge);
    const HsvWeights hw{env.run.judge.hsv_weight_h, env.run.judge.hsv_weight_s,
                        env.run.judge.hsv_weight_v};
    const double sub = subtlety_penalty(theta, env.theta_ref, env.run.subtlety_delta_min, hw);
    return compute_loss(rec.per_step_costs, S, env.run.epsilon, sub, env.run.subtlety_weight);
}

OptimizeResult optimize(const OptimizeEnv& env, JudgeBackend& judge,
                        const CheckpointFn& checkpoint) {
    OptimizeResult result;
    Grid3 theta = env.theta_ref;
    AdamState adam = make_adam_state(theta.height(), theta.width(), theta.channels());

    // Revert target: the last iterate whose aggregate S met the floor.
    Grid3 compliant_theta = theta;
    int compliant_iteration = 0;
    int consecutive_below = 0;
    double last_s = 1.0;
    bool stopped = false;

    int iter = 0;
    bool have_s = false;
    for (; iter < env.run.iterations; ++iter) {
        std::optional<double> s_override;
        if (env.run.judge_every_n_iters > 1 && iter % env.run.judge_every_n_iters != 0)
            s_override = last_s;

        std::pair<Grid3, LossReport> step_out;
        try {
            step_out = loss_gradient(env, theta, judge, s_override);
        } catch (const Error& e) {
            const bool transient = e.category() == "judge" || e.category() == "network";
            if (transient && env.run.judge.failure_fallback == "last" && have_s)
                step_out = loss_gradient(env, theta, judge, last_s);
            else
                throw;
        }
        auto& [grad, report] = step_out;
        report.iteration = iter;
        if (report.judged) have_s = true;
        last_s = report.S;
        result.reports.push_back(report);

        if (report.S >= env.run.early_stop_s_floor) {
            consecutive_below = 0;
            compliant_theta = theta;
            compliant_iteration = iter;
        } else if (++consecutive_below >= env.run.early_stop_patience) {
            stopped = true;
        }

        if (checkpoint && env.run.checkpoint_every > 0 && iter % env.run.checkpoint_every == 0)
            checkpoint(iter, theta);

        if (stopped) {
            ++iter;
            break;
        }

        adam_step(theta, grad, adam, env.run.adam, &env.freeze_mask);
    }

    result.iterations_run = iter;
    result.early_stopped = stopped;
    if (stopped) {
        result.theta = compliant_theta;
        result.returned_iteration = compliant_iteration;
    } else {
        result.theta = theta;
        result.returned_iteration = iter;
    }
    if (checkpoint) checkpoint(result.returned_iteration, result.theta);
    return result;
}

}  // namespace advtex
