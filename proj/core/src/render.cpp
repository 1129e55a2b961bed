#include "advtex/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "advtex/errors.hpp"

namespace advtex {

namespace {

struct Vec3 {
    double x, y, z;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double k, Vec3 a) { return {k * a.x, k * a.y, k * a.z}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

// The near plane keeps lambda away from the camera pinhole singularity.
constexpr double kNearPlane = 0.05;

}  // namespace

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Grid3 texture_activation(const Grid3& theta) {
    Grid3 out(theta.height(), theta.width(), theta.channels());
    for (size_t i = 0; i < theta.size(); ++i) out[i] = logistic(theta[i]);
    return out;
}

Grid3 texture_logit(const Grid3& activated) {
    Grid3 out(activated.height(), activated.width(), activated.channels());
    for (size_t i = 0; i < activated.size(); ++i) {
        double p = std::clamp(activated[i], 0.004, 0.996);
        out[i] = std::log(p / (1.0 - p));
    }
    return out;
}

Grid3 reference_texture(int height, int width) {
    Grid3 tex(height, width, 3);
    const double tau = 2.0 * std::numbers::pi;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c) {
                double phase_x = tau * (x + 0.5) / width + tau * c / 3.0;
                double phase_y = tau * (y + 0.5) / height;
                tex.at(y, x, c) = 0.5 + 0.4 * std::sin(phase_x) * std::cos(phase_y);
            }
    return tex;
}

ImageFrame render(const SceneConfig& scene, const VehicleState& state, const Grid3& theta,
                  RenderTape* tape, Mask3* object_mask) {
    if (theta.channels() != 3) throw ValidationError("texture must have 3 channels");
    if (!theta.all_finite()) throw ValidationError("texture values must be finite");

    const int H = scene.image_height;
    const int W = scene.image_width;
    const int TH = theta.height();
    const int TW = theta.width();

    Grid3 activated = texture_activation(theta);

    if (tape) {
        tape->frame_height = H;
        tape->frame_width = W;
        tape->tex_height = TH;
        tape->tex_width = TW;
        tape->object_visible = false;
        tape->samples.clear();
        tape->activated = activated;
        tape->activation_deriv = Grid3(TH, TW, 3);
        for (size_t i = 0; i < activated.size(); ++i)
            tape->activation_deriv[i] = activated[i] * (1.0 - activated[i]);
    }
    if (object_mask) *object_mask = Mask3(H, W, 1);

    const double h = state.heading;
    const double ch = std::cos(h);
    const double sh = std::sin(h);
    const Vec3 fwd{ch, sh, 0.0};
    const Vec3 right{sh, -ch, 0.0};
    const Vec3 down{0.0, 0.0, -1.0};
    const Vec3 origin = Vec3{state.x, state.y, 0.0} + scene.camera_forward_m * fwd +
                        scene.camera_lateral_m * right + Vec3{0.0, 0.0, scene.camera_height_m};

    // Camera origin sensitivities to the vehicle pose (x, y, heading).
    const Vec3 dO_dh = scene.camera_forward_m * Vec3{-sh, ch, 0.0} +
                       scene.camera_lateral_m * Vec3{ch, sh, 0.0};

    const double psi = scene.object_yaw;
    const Vec3 normal{std::cos(psi), std::sin(psi), 0.0};
    const Vec3 edge_h{-std::sin(psi), std::cos(psi), 0.0};
    const Vec3 center{scene.object_x, scene.object_y, scene.object_height / 2.0};
    const double half_w = scene.object_width / 2.0;
    const double half_h = scene.object_height / 2.0;

    const double focal = scene.camera_focal_px;
    const double n_dot_co = dot(normal, center - origin);

    ImageFrame frame(H, W);
    bool visible = false;

    for (int row = 0; row < H; ++row) {
        const double b = (row + 0.5 - scene.camera_cy) / focal;
        for (int col = 0; col < W; ++col) {
            const double a = (col + 0.5 - scene.camera_cx) / focal;
            const Vec3 dir = fwd + a * right + b * down;

            double shade[3];
            if (b > 0.0) {
                shade[0] = shade[1] = shade[2] = kRoadShade;
            } else {
                shade[0] = kSkyShade[0];
                shade[1] = kSkyShade[1];
                shade[2] = kSkyShade[2];
            }

            const double denom = dot(normal, dir);
            bool hit = false;
            double s = 0.0, t = 0.0, lambda = 0.0;
            if (std::fabs(denom) > 1e-12) {
                lambda = n_dot_co / denom;
                if (lambda > kNearPlane) {
                    const Vec3 p = origin + lambda * dir;
                    const double alpha = dot(p - center, edge_h);
                    const double beta = p.z - center.z;
                    if (std::fabs(alpha) <= half_w && std::fabs(beta) <= half_h) {
                        s = alpha / scene.object_width + 0.5;
                        t = 0.5 - beta / scene.object_height;
                        hit = true;
                    }
                }
            }

            if (!hit) {
                for (int c = 0; c < 3; ++c) frame.pixels.at(row, col, c) = shade[c];
                continue;
            }

            visible = true;
            if (object_mask) object_mask->set(row, col, 0, true);

            // Texel centers sit at (i + 0.5) / extent in (s, t) space.
            const double xs = s * TW - 0.5;
            const double yt = t * TH - 0.5;
            const double xf = std::floor(xs);
            const double yf = std::floor(yt);
            const int x0 = std::clamp(static_cast<int>(xf), 0, TW - 1);
            const int x1 = std::clamp(static_cast<int>(xf) + 1, 0, TW - 1);
            const int y0 = std::clamp(static_cast<int>(yf), 0, TH - 1);
            const int y1 = std::clamp(static_cast<int>(yf) + 1, 0, TH - 1);
            const double fx = xs - xf;
            const double fy = yt - yf;

            for (int c = 0; c < 3; ++c) {
                const double v0 = (1.0 - fx) * activated.at(y0, x0, c) + fx * activated.at(y0, x1, c);
                const double v1 = (1.0 - fx) * activated.at(y1, x0, c) + fx * activated.at(y1, x1, c);
                frame.pixels.at(row, col, c) = (1.0 - fy) * v0 + fy * v1;
            }

            if (tape) {
                PixelSample rec;
                rec.row = row;
                rec.col = col;
                rec.x0 = x0;
                rec.x1 = x1;
                rec.y0 = y0;
                rec.y1 = y1;
                rec.fx = fx;
                rec.fy = fy;

                // d lambda / d pose, then d (s, t) / d pose through the hit point.
                const Vec3 dD_dh = Vec3{-sh, ch, 0.0} + a * Vec3{ch, sh, 0.0};
                const Vec3 dO[3] = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, dO_dh};
                for (int p = 0; p < 3; ++p) {
                    const double ndO = dot(normal, dO[p]);
                    const double ndD = p == 2 ? dot(normal, dD_dh) : 0.0;
                    const double dlambda = (-ndO - lambda * ndD) / denom;
                    Vec3 dP = dO[p] + dlambda * dir;
                    if (p == 2) dP = dP + lambda * dD_dh;
                    rec.ds_dpose[p] = dot(dP, edge_h) / scene.object_width;
                    rec.dt_dpose[p] = -dP.z / scene.object_height;
                }
                tape->samples.push_back(rec);
            }
        }
    }

    if (tape) tape->object_visible = visible;
    return frame;
}

void backprop_frame(const RenderTape& tape, const Grid3& frame_adjoint, Grid3& dtheta) {
    if (frame_adjoint.height() != tape.frame_height || frame_adjoint.width() != tape.frame_width ||
        frame_adjoint.channels() != 3)
        throw ValidationError("frame adjoint shape does not match tape dims");
    if (dtheta.height() != tape.tex_height || dtheta.width() != tape.tex_width ||
        dtheta.channels() != 3)
        throw ValidationError("texture gradient shape does not match tape dims");

    const Grid3& act_d = tape.activation_deriv;
    for (const PixelSample& r : tape.samples) {
        const double w00 = (1.0 - r.fx) * (1.0 - r.fy);
        const double w10 = r.fx * (1.0 - r.fy);
        const double w01 = (1.0 - r.fx) * r.fy;
        const double w11 = r.fx * r.fy;
        for (int c = 0; c < 3; ++c) {
            const double aj = frame_adjoint.at(r.row, r.col, c);
            if (aj == 0.0) continue;
            dtheta.at(r.y0, r.x0, c) += aj * w00 * act_d.at(r.y0, r.x0, c);
            dtheta.at(r.y0, r.x1, c) += aj * w10 * act_d.at(r.y0, r.x1, c);
            dtheta.at(r.y1, r.x0, c) += aj * w01 * act_d.at(r.y1, r.x0, c);
            dtheta.at(r.y1, r.x1, c) += aj * w11 * act_d.at(r.y1, r.x1, c);
        }
    }
}

std::array<double, 3> backprop_pose(const RenderTape& tape, const Grid3& frame_adjoint) {
    if (frame_adjoint.height() != tape.frame_height || frame_adjoint.width() != tape.frame_width ||
        frame_adjoint.channels() != 3)
        throw ValidationError("frame adjoint shape does not match tape dims");

    const Grid3& act = tape.activated;
    std::array<double, 3> grad{0.0, 0.0, 0.0};
    for (const PixelSample& r : tape.samples) {
        double g_s = 0.0;
        double g_t = 0.0;
        for (int c = 0; c < 3; ++c) {
            const double aj = frame_adjoint.at(r.row, r.col, c);
            if (aj == 0.0) continue;
            const double dfx = (1.0 - r.fy) * (act.at(r.y0, r.x1, c) - act.at(r.y0, r.x0, c)) +
                               r.fy * (act.at(r.y1, r.x1, c) - act.at(r.y1, r.x0, c));
            const double dfy = (1.0 - r.fx) * (act.at(r.y1, r.x0, c) - act.at(r.y0, r.x0, c)) +
                               r.fx * (act.at(r.y1, r.x1, c) - act.at(r.y0, r.x1, c));
            g_s += aj * dfx * tape.tex_width;
            g_t += aj * dfy * tape.tex_height;
        }
        for (int p = 0; p < 3; ++p) grad[p] += g_s * r.ds_dpose[p] + g_t * r.dt_dpose[p];
    }
    return grad;
}

}  // namespace advtex
