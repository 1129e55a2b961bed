#pragma once

#include <vector>

#include "advtex/config.hpp"
#include "advtex/grid.hpp"
#include "advtex/render.hpp"
#include "advtex/rng.hpp"
#include "advtex/types.hpp"

namespace advtex {

// Fixed linear steering policy over a 16x16 grayscale downsample of the frame.
// steer = u_max * tanh(gain * (w . g + bias)); the policy is attacked, never trained.
struct PolicyWeights {
    int input_height = 16;
    int input_width = 16;
    std::vector<double> w;  // input_height * input_width, row-major
    double bias = 0.0;
    double gain = 1.0;
    double u_max = 1.0;

    void validate() const;
};

// Exact area-average downsample weights from (frame_h x frame_w) to
// (out_h x out_w); each output cell's weights sum to 1.
struct DownsamplePlan {
    int frame_height = 0, frame_width = 0;
    int out_height = 0, out_width = 0;
    // per output cell: list of (pixel_row, pixel_col, weight)
    struct Term {
        int row, col;
        double weight;
    };
    std::vector<std::vector<Term>> cells;
};

DownsamplePlan make_downsample_plan(int frame_height, int frame_width, int out_height,
                                    int out_width);

// Grayscale (mean of channels) then area-average into out_height x out_width.
std::vector<double> policy_features(const ImageFrame& frame, const DownsamplePlan& plan);

struct PolicyTape {
    double z = 0.0;  // pre-tanh linear response
};

PolicyWeights make_policy_weights(const SceneConfig& scene, SplitRng& rng);

// Shifts the bias so the given frame maps to zero steer.
void calibrate_bias(PolicyWeights& weights, const ImageFrame& frame, const DownsamplePlan& plan);

Control policy(const ImageFrame& frame, const PolicyWeights& weights, const DownsamplePlan& plan,
               PolicyTape* tape = nullptr);

// Adjoint of the policy: accumulates dL/dframe given dL/dsteer.
void policy_backprop(const PolicyWeights& weights, const DownsamplePlan& plan,
                     const PolicyTape& tape, double steer_adjoint, Grid3& frame_adjoint);

// Unicycle kinematics, heading updated before position.
VehicleState step(const VehicleState& state, const Control& control, double dt);

double cost(const VehicleState& state, const SceneConfig& scene);

struct RolloutResult {
    Trajectory trajectory;
    std::vector<ImageFrame> frames;  // T+1 frames, one per state
    std::vector<RenderTape> tapes;
    std::vector<Mask3> object_masks;
    std::vector<PolicyTape> policy_tapes;  // T entries, controls 0..T-1
    double cost_sum = 0.0;                 // sum of per-state costs, t = 0..T
    std::vector<double> per_step_costs;
};

// Closed-loop simulation for scene.horizon steps; records everything the
// adjoint pass and the judge need. `keep_tapes=false` drops adjoint data for
// judge-only callers.
RolloutResult rollout(const SceneConfig& scene, const Grid3& theta, const PolicyWeights& weights,
                      bool keep_tapes = true);

// Reverse pass over a recorded rollout: gradient of sum-of-costs with respect
// to theta, including the pose -> frame coupling at every step.
Grid3 rollout_cost_gradient(const SceneConfig& scene, const PolicyWeights& weights,
                            const RolloutResult& rec);

}  // namespace advtex
