#pragma once

#include <cstdint>
#include <string>
#include <utility>

namespace advtex {

/// Scene model: a textured billboard beside a straight road, a pinhole
/// camera rigidly mounted on the ego vehicle, and the rollout horizon.
struct SceneConfig {
    // billboard (width x height meters, base resting on the ground)
    double object_x = 26.0;
    double object_y = 2.0;
    double object_yaw = 3.14159265358979323846;  // rad; pi faces the approaching camera
    double object_width = 2.5;
    double object_height = 2.0;

    // camera intrinsics (pixels) and mount relative to the vehicle pose
    double camera_focal_px = 64.0;
    double camera_cx = 32.0;  // defaults to image_width / 2 when absent from the file
    double camera_cy = 32.0;  // defaults to image_height / 2 when absent from the file
    double camera_forward_m = 0.0;
    double camera_lateral_m = 0.0;
    double camera_height_m = 1.2;

    int image_height = 64;
    int image_width = 64;

    int horizon = 40;  // T
    double dt = 0.1;   // s

    double target_offset = 2.5;  // adversarial target lateral offset (m)

    // ego start pose; speed is constant over the rollout
    double ego_x = 0.0;
    double ego_y = 0.0;
    double ego_heading = 0.0;
    double ego_speed = 5.0;

    int texture_height = 16;
    int texture_width = 16;
    std::string texture_png;      // optional reference texture; empty = built-in pattern
    std::string freeze_mask_png;  // optional freeze mask (any channel > 0.5 freezes all three)

    // fixed seeded steering policy
    double policy_gain = 25.0;
    double policy_u_max = 1.5;  // rad/s

    void validate() const;

    friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

struct VlmSettings {
    std::string base_url;       // e.g. http://127.0.0.1:8080
    std::string model = "gpt-4-vision-preview";
    double temperature = 0.0;
    std::string auth_env = "ADVTEX_VLM_TOKEN";  // env var holding the bearer token
    std::string prompt_path;                    // judge prompt template file
    double timeout_s = 60.0;
    int max_inflight = 2;
    int max_attempts = 3;
    int backoff_ms = 500;
    std::string transcript_log;  // JSONL audit log path; empty = disabled

    friend bool operator==(const VlmSettings&, const VlmSettings&) = default;
};

struct JudgeSettings {
    std::string backend = "hsv";  // hsv | rubric | const | vlm | none
    double hsv_weight_h = 0.6;
    double hsv_weight_s = 0.3;
    double hsv_weight_v = 0.1;
    // fixed rubric criteria for the offline rubric judge (0..10 each);
    // color similarity comes from the HSV score
    int rubric_law = 10;
    int rubric_appearance = 9;
    int rubric_recreation = 2;
    double const_value = 1.0;
    // "abort" stops the run on judge failure, "last" substitutes the last
    // successful score
    std::string failure_fallback = "abort";
    VlmSettings vlm;

    void validate() const;

    friend bool operator==(const JudgeSettings&, const JudgeSettings&) = default;
};

struct AdamHyper {
    double step = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

struct RunConfig {
    double epsilon = 1e-3;  // guard in 1/(S + eps)
    int judge_stride = 5;   // trajectory subsampling stride for scoring
    AdamHyper adam;
    int iterations = 200;
    uint64_t seed = 0;
    double subtlety_weight = 1.0;     // lambda
    double subtlety_delta_min = 0.02; // hinge width of the subtlety penalty
    int judge_every_n_iters = 1;
    int checkpoint_every = 50;  // 0 disables checkpoints
    double early_stop_s_floor = 0.2;
    int early_stop_patience = 10;
    JudgeSettings judge;

    void validate() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses the key/value config document at `path` (sections [scene], [run],
/// [judge], [vlm]; see README for the schema). Relative paths inside the file
/// resolve against the file's directory. Throws ParseError on malformed
/// input, ValidationError naming the first violated invariant.
std::pair<SceneConfig, RunConfig> load_config(const std::string& path);

/// Writes a document load_config reads back field-for-field.
void save_config(const SceneConfig& scene, const RunConfig& run, const std::string& path);

}  // namespace advtex
