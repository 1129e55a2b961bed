#include "advtex/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "advtex/errors.hpp"

namespace advtex {

void PolicyWeights::validate() const {
    if (input_height <= 0 || input_width <= 0)
        throw ValidationError("policy input dims must be positive");
    if (static_cast<int>(w.size()) != input_height * input_width)
        throw ValidationError("policy weight count does not match input dims");
    for (double v : w)
        if (!std::isfinite(v)) throw ValidationError("policy weights must be finite");
    if (!std::isfinite(bias) || !std::isfinite(gain))
        throw ValidationError("policy bias/gain must be finite");
    if (!(u_max > 0.0)) throw ValidationError("policy u_max must be > 0");
}

DownsamplePlan make_downsample_plan(int frame_height, int frame_width, int out_height,
                                    int out_width) {
    if (frame_height < out_height || frame_width < out_width)
        throw ValidationError("downsample target larger than frame");
    DownsamplePlan plan;
    plan.frame_height = frame_height;
    plan.frame_width = frame_width;
    plan.out_height = out_height;
    plan.out_width = out_width;
    plan.cells.resize(static_cast<size_t>(out_height) * out_width);

    // Output cell (i, j) averages the frame over
    // [i*H/oh, (i+1)*H/oh) x [j*W/ow, (j+1)*W/ow) with exact fractional overlap.
    const double sy = static_cast<double>(frame_height) / out_height;
    const double sx = static_cast<double>(frame_width) / out_width;
    for (int i = 0; i < out_height; ++i) {
        const double y_lo = i * sy;
        const double y_hi = (i + 1) * sy;
        for (int j = 0; j < out_width; ++j) {
            const double x_lo = j * sx;
            const double x_hi = (j + 1) * sx;
            auto& terms = plan.cells[static_cast<size_t>(i) * out_width + j];
            const double area = sy * sx;
            for (int r = static_cast<int>(std::floor(y_lo));
                 r < static_cast<int>(std::ceil(y_hi)); ++r) {
                const double oy = std::min<double>(r + 1, y_hi) - std::max<double>(r, y_lo);
                if (oy <= 0.0) continue;
                for (int c = static_cast<int>(std::floor(x_lo));
                     c < static_cast<int>(std::ceil(x_hi)); ++c) {
                    const double ox = std::min<double>(c + 1, x_hi) - std::max<double>(c, x_lo);
                    if (ox <= 0.0) continue;
                    terms.push_back({r, c, oy * ox / area});
                }
            }
        }
    }
    return plan;
}

std::vector<double> policy_features(const ImageFrame& frame, const DownsamplePlan& plan) {
    if (frame.height() != plan.frame_height || frame.width() != plan.frame_width)
        throw ValidationError("frame dims do not match downsample plan");
    std::vector<double> g(plan.cells.size(), 0.0);
    for (size_t k = 0; k < plan.cells.size(); ++k) {
        double acc = 0.0;
        for (const auto& t : plan.cells[k]) {
            const double gray = (frame.pixels.at(t.row, t.col, 0) + frame.pixels.at(t.row, t.col, 1) +
                                 frame.pixels.at(t.row, t.col, 2)) /
                                3.0;
            acc += t.weight * gray;
        }
        g[k] = acc;
    }
    return g;
}

PolicyWeights make_policy_weights(const SceneConfig& scene, SplitRng& rng) {
    PolicyWeights pw;
    pw.gain = scene.policy_gain;
    pw.u_max = scene.policy_u_max;
    pw.w.resize(static_cast<size_t>(pw.input_height) * pw.input_width);
    const double scale = 1.0 / (pw.input_height * pw.input_width);
    for (double& v : pw.w) v = scale * rng.next_normal();
    pw.validate();
    return pw;
}

void calibrate_bias(PolicyWeights& weights, const ImageFrame& frame, const DownsamplePlan& plan) {
    std::vector<double> g = policy_features(frame, plan);
    double z = 0.0;
    for (size_t k = 0; k < g.size(); ++k) z += weights.w[k] * g[k];
    weights.bias = -z;
}

Control policy(const ImageFrame& frame, const PolicyWeights& weights, const DownsamplePlan& plan,
               PolicyTape* tape) {
    std::vector<double> g = policy_features(frame, plan);
    if (g.size() != weights.w.size())
        throw ValidationError("policy weight count does not match plan");
    // Same accumulation order as calibrate_bias so the calibration frame
    // cancels to exactly zero steer.
    double dot = 0.0;
    for (size_t k = 0; k < g.size(); ++k) dot += weights.w[k] * g[k];
    const double z = dot + weights.bias;
    if (tape) tape->z = z;
    double steer = weights.u_max * std::tanh(weights.gain * z);
    steer = std::clamp(steer, -weights.u_max, weights.u_max);
    return Control{steer};
}

void policy_backprop(const PolicyWeights& weights, const DownsamplePlan& plan,
                     const PolicyTape& tape, double steer_adjoint, Grid3& frame_adjoint) {
    if (frame_adjoint.height() != plan.frame_height || frame_adjoint.width() != plan.frame_width)
        throw ValidationError("frame adjoint dims do not match downsample plan");
    const double th = std::tanh(weights.gain * tape.z);
    const double dsteer_dz = weights.u_max * weights.gain * (1.0 - th * th);
    const double dz = steer_adjoint * dsteer_dz;
    for (size_t k = 0; k < plan.cells.size(); ++k) {
        const double dzk = dz * weights.w[k];
        if (dzk == 0.0) continue;
        for (const auto& t : plan.cells[k]) {
            const double dpix = dzk * t.weight / 3.0;
            frame_adjoint.at(t.row, t.col, 0) += dpix;
            frame_adjoint.at(t.row, t.col, 1) += dpix;
            frame_adjoint.at(t.row, t.col, 2) += dpix;
        }
    }
}

VehicleState step(const VehicleState& state, const Control& control, double dt) {
    if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
    VehicleState next = state;
    next.heading = normalize_heading(state.heading + control.steer * dt);
    next.x = state.x + state.speed * std::cos(next.heading) * dt;
    next.y = state.y + state.speed * std::sin(next.heading) * dt;
    return next;
}

double cost(const VehicleState& state, const SceneConfig& scene) {
    const double d = state.y - scene.target_offset;
    return d * d;
}

RolloutResult rollout(const SceneConfig& scene, const Grid3& theta, const PolicyWeights& weights,
                      bool keep_tapes) {
    RolloutResult rec;
    const int T = scene.horizon;
    DownsamplePlan plan = make_downsample_plan(scene.image_height, scene.image_width,
                                               weights.input_height, weights.input_width);

    VehicleState state{scene.ego_x, scene.ego_y, scene.ego_heading, scene.ego_speed};
    rec.trajectory.dt = scene.dt;
    rec.trajectory.states.reserve(T + 1);
    rec.trajectory.controls.reserve(T);
    rec.frames.reserve(T + 1);

    for (int t = 0; t <= T; ++t) {
        rec.trajectory.states.push_back(state);
        RenderTape tape;
        Mask3 mask;
        ImageFrame frame = render(scene, state, theta, keep_tapes ? &tape : nullptr, &mask);
        rec.object_masks.push_back(std::move(mask));
        const double c = cost(state, scene);
        rec.per_step_costs.push_back(c);
        rec.cost_sum += c;
        if (t < T) {
            PolicyTape ptape;
            Control u = policy(frame, weights, plan, &ptape);
            rec.policy_tapes.push_back(ptape);
            rec.trajectory.controls.push_back(u);
            state = step(state, u, scene.dt);
        }
        rec.frames.push_back(std::move(frame));
        if (keep_tapes) rec.tapes.push_back(std::move(tape));
    }
    return rec;
}

Grid3 rollout_cost_gradient(const SceneConfig& scene, const PolicyWeights& weights,
                            const RolloutResult& rec) {
    const int T = scene.horizon;
    if (static_cast<int>(rec.trajectory.states.size()) != T + 1 ||
        static_cast<int>(rec.tapes.size()) != T + 1)
        throw ValidationError("rollout record does not match scene horizon");

    DownsamplePlan plan = make_downsample_plan(scene.image_height, scene.image_width,
                                               weights.input_height, weights.input_width);
    const int th = rec.tapes[0].tex_height;
    const int tw = rec.tapes[0].tex_width;
    Grid3 dtheta(th, tw, 3);

    // lambda = d(sum of costs) / d x_t, running backward from t = T.
    double lam[3] = {0.0, 2.0 * (rec.trajectory.states[T].y - scene.target_offset), 0.0};

    for (int t = T - 1; t >= 0; --t) {
        const VehicleState& next = rec.trajectory.states[t + 1];
        const double v = rec.trajectory.states[t].speed;
        const double dt = scene.dt;
        const double sin_h = std::sin(next.heading);
        const double cos_h = std::cos(next.heading);

        // x_{t+1} = step(x_t, u_t): heading-first unicycle update.
        const double dxdh = -v * sin_h * dt;
        const double dydh = v * cos_h * dt;
        const double dxdu = -v * sin_h * dt * dt;
        const double dydu = v * cos_h * dt * dt;
        const double dhdu = dt;

        // dL/du_t through the state chain.
        const double du = dxdu * lam[0] + dydu * lam[1] + dhdu * lam[2];

        // u_t = policy(frame_t); frame_t depends on theta and on x_t.
        Grid3 frame_adj(scene.image_height, scene.image_width, 3);
        policy_backprop(weights, plan, rec.policy_tapes[t], du, frame_adj);
        backprop_frame(rec.tapes[t], frame_adj, dtheta);
        const std::array<double, 3> pose_g = backprop_pose(rec.tapes[t], frame_adj);

        // lambda_t = dC/dx_t + (dstep/dx)^T lambda_{t+1} + (dframe/dx)^T ...
        double nxt[3];
        nxt[0] = lam[0] + pose_g[0];
        nxt[1] = 2.0 * (rec.trajectory.states[t].y - scene.target_offset) + lam[1] + pose_g[1];
        nxt[2] = dxdh * lam[0] + dydh * lam[1] + lam[2] + pose_g[2];
        lam[0] = nxt[0];
        lam[1] = nxt[1];
        lam[2] = nxt[2];
    }
    return dtheta;
}

}  // namespace advtex
