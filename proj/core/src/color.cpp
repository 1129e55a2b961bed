#include "advtex/color.hpp"

#include <cmath>

namespace advtex {

namespace {

// First-wins argmax/argmin over (r, g, b) keeps tie handling deterministic.
int arg_max3(double r, double g, double b) {
    if (r >= g && r >= b) return 0;
    if (g >= b) return 1;
    return 2;
}

int arg_min3(double r, double g, double b) {
    if (r <= g && r <= b) return 0;
    if (g <= b) return 1;
    return 2;
}

}  // namespace

Hsv rgb_to_hsv(double r, double g, double b, HsvJacobian* jac) {
    const double rgb[3] = {r, g, b};
    const int mi = arg_max3(r, g, b);
    const int ni = arg_min3(r, g, b);
    const double vmax = rgb[mi];
    const double vmin = rgb[ni];
    const double c = vmax - vmin;

    Hsv out;
    out.v = vmax;
    out.s = vmax > 0.0 ? c / vmax : 0.0;
    out.achromatic = !(c > 0.0);

    if (!out.achromatic) {
        if (mi == 0) {
            double h = 60.0 * (g - b) / c;
            out.h = h < 0.0 ? h + 360.0 : h;
        } else if (mi == 1) {
            out.h = 60.0 * ((b - r) / c + 2.0);
        } else {
            out.h = 60.0 * ((r - g) / c + 4.0);
        }
        if (out.h >= 360.0) out.h -= 360.0;
    }

    if (jac) {
        *jac = HsvJacobian{};
        jac->dv[mi] = 1.0;
        if (vmax > 0.0 && c > 0.0) {
            // s = 1 - vmin / vmax
            jac->ds[mi] += vmin / (vmax * vmax);
            jac->ds[ni] += -1.0 / vmax;
        }
        if (c > 0.0) {
            // h = 60 * (p - q) / c + offset, with dc/dx = [x == max] - [x == min]
            int p, q;
            if (mi == 0) {
                p = 1;
                q = 2;
            } else if (mi == 1) {
                p = 2;
                q = 0;
            } else {
                p = 0;
                q = 1;
            }
            const double num = rgb[p] - rgb[q];
            for (int x = 0; x < 3; ++x) {
                const double dnum = (x == p ? 1.0 : 0.0) - (x == q ? 1.0 : 0.0);
                const double dc = (x == mi ? 1.0 : 0.0) - (x == ni ? 1.0 : 0.0);
                jac->dh[x] = 60.0 * (dnum * c - num * dc) / (c * c);
            }
        }
    }
    return out;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    if (!(s > 0.0)) return {v, v, v};
    double hp = h / 60.0;
    hp = hp - 6.0 * std::floor(hp / 6.0);
    const int i = static_cast<int>(hp) % 6;
    const double f = hp - std::floor(hp);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (i) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

double circular_hue_delta(double h1, double h2) {
    double d = std::fabs(h1 - h2);
    d = d - 360.0 * std::floor(d / 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

double circular_hue_delta_dh1(double h1, double h2) {
    double d = h1 - h2;
    d = d - 360.0 * std::floor(d / 360.0);  // now in [0, 360)
    if (d == 0.0 || d == 180.0) return 0.0;
    return d < 180.0 ? 1.0 : -1.0;
}

}  // namespace advtex
