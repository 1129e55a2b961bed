#pragma once

#include <array>
#include <vector>

#include "advtex/config.hpp"
#include "advtex/grid.hpp"
#include "advtex/types.hpp"

namespace advtex {

// One billboard-covered pixel: the four bilinear corners it sampled and the
// sensitivity of its texture coordinates to the vehicle pose (x, y, heading).
struct PixelSample {
    int row = 0;
    int col = 0;
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
    double fx = 0.0, fy = 0.0;
    std::array<double, 3> ds_dpose{0.0, 0.0, 0.0};
    std::array<double, 3> dt_dpose{0.0, 0.0, 0.0};
};

// Adjoint bookkeeping for one rendered frame.
struct RenderTape {
    int frame_height = 0;
    int frame_width = 0;
    int tex_height = 0;
    int tex_width = 0;
    bool object_visible = false;
    std::vector<PixelSample> samples;
    Grid3 activated;         // sigma(theta), tex_height x tex_width x 3
    Grid3 activation_deriv;  // sigma * (1 - sigma), same shape
};

// Elementwise logistic map; output in [0,1], saturating to the endpoints in
// floating point beyond |v| of about 37.
Grid3 texture_activation(const Grid3& theta);
double logistic(double v);
// Inverse of the logistic map with inputs clamped away from {0,1}.
Grid3 texture_logit(const Grid3& activated);

// Rasterizes the billboard over the two-tone background. `tape` and
// `object_mask` are optional outputs; the mask marks billboard-covered pixels.
ImageFrame render(const SceneConfig& scene, const VehicleState& state, const Grid3& theta,
                  RenderTape* tape = nullptr, Mask3* object_mask = nullptr);

// Chain rule from a frame adjoint back to theta; accumulates into dtheta.
void backprop_frame(const RenderTape& tape, const Grid3& frame_adjoint, Grid3& dtheta);

// Chain rule from a frame adjoint back to the vehicle pose (x, y, heading).
std::array<double, 3> backprop_pose(const RenderTape& tape, const Grid3& frame_adjoint);

// Deterministic reference texture, every channel strictly inside (0.05, 0.95).
Grid3 reference_texture(int height, int width);

// Road/sky shading constants shared by the renderer and tests.
inline constexpr double kRoadShade = 0.30;
inline constexpr std::array<double, 3> kSkyShade{0.53, 0.71, 0.92};

}  // namespace advtex
