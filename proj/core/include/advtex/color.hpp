#pragma once

#include <array>

namespace advtex {

// Hue in degrees [0, 360), saturation and value in [0, 1].
struct Hsv {
    double h = 0.0;
    double s = 0.0;
    double v = 0.0;
    // True when the pixel has no defined hue (max == min).
    bool achromatic = true;
};

// Rows are (h, s, v), columns are (r, g, b).
// At ties and achromatic pixels the undefined entries are zero (subgradient choice).
struct HsvJacobian {
    std::array<double, 3> dh{0.0, 0.0, 0.0};
    std::array<double, 3> ds{0.0, 0.0, 0.0};
    std::array<double, 3> dv{0.0, 0.0, 0.0};
};

Hsv rgb_to_hsv(double r, double g, double b, HsvJacobian* jac = nullptr);

std::array<double, 3> hsv_to_rgb(double h, double s, double v);

// Shortest circular distance between hues in degrees, in [0, 180].
double circular_hue_delta(double h1, double h2);

// d circular_hue_delta / d h1; zero at the wrap/tie points.
double circular_hue_delta_dh1(double h1, double h2);

}  // namespace advtex
