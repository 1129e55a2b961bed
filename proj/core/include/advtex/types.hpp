#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "advtex/errors.hpp"
#include "advtex/grid.hpp"

namespace advtex {

/// Wraps an angle into (-pi, pi]. Idempotent.
inline double normalize_heading(double h) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(h + std::numbers::pi, two_pi);
    if (r <= 0.0) r += two_pi;
    return r - std::numbers::pi;
}

/// Planar pose + speed of the ego vehicle.
struct VehicleState {
    double x = 0.0;        // m
    double y = 0.0;        // m, lateral (road runs along +x, centerline y = 0)
    double heading = 0.0;  // rad, in (-pi, pi]
    double speed = 0.0;    // m/s, >= 0

    VehicleState() = default;
    VehicleState(double x_, double y_, double heading_, double speed_)
        : x(x_), y(y_), heading(normalize_heading(heading_)), speed(speed_) {
        if (!(speed >= 0.0)) throw ValidationError("speed must be non-negative");
    }

    friend bool operator==(const VehicleState& a, const VehicleState& b) {
        return a.x == b.x && a.y == b.y && a.heading == b.heading && a.speed == b.speed;
    }
};

/// Yaw-rate command, clamped to [-u_max, u_max] by the policy.
struct Control {
    double steer = 0.0;  // rad/s
};

/// T+1 states produced by the closed-loop rollout. Consecutive states satisfy
/// the dynamics step exactly, so the trajectory-consistency constraint holds
/// by construction.
struct Trajectory {
    std::vector<VehicleState> states;
    std::vector<Control> controls;  // controls[t] moved states[t] -> states[t+1]
    double dt = 0.0;

    size_t length() const noexcept { return states.size(); }
    int horizon() const noexcept { return static_cast<int>(states.size()) - 1; }
};

/// The optimization variable theta: an unconstrained real grid mapped to RGB
/// through the logistic activation, plus a freeze mask marking coordinates
/// exempt from updates.
struct TextureParams {
    Grid3 values;      // H_tex x W_tex x 3, unconstrained reals
    Mask3 freeze_mask; // same shape; true = frozen

    TextureParams() = default;
    TextureParams(int height, int width)
        : values(height, width, 3, 0.0), freeze_mask(height, width, 3, false) {}

    int height() const noexcept { return values.height(); }
    int width() const noexcept { return values.width(); }

    void validate() const {
        if (!values.all_finite()) throw ValidationError("texture values must be finite");
        if (freeze_mask.height() != values.height() || freeze_mask.width() != values.width() ||
            freeze_mask.channels() != values.channels())
            throw ValidationError("freeze mask shape must match texture values");
    }

    friend bool operator==(const TextureParams& a, const TextureParams& b) {
        return a.values == b.values && a.freeze_mask == b.freeze_mask;
    }
};

}  // namespace advtex
