#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "advtex/config.hpp"
#include "advtex/grid.hpp"

namespace advtex {

struct RubricScores {
    int color_similarity = 0;
    int law_of_traffic = 0;
    int real_life_appearance = 0;
    int real_life_recreation = 0;

    void validate() const;
};

struct JudgeVerdict {
    double score = 0.0;  // in [0,1]
    std::string rationale;
    std::optional<RubricScores> breakdown;
};

// Weighted sum with weights (0.5, 0.3, 0.15, 0.05) over criteria scaled to [0,1].
double rubric_score(const RubricScores& scores);

struct HsvWeights {
    double h = 0.6;
    double s = 0.3;
    double v = 0.1;
};

// Mean per-pixel HSV distance d = sqrt(wh*(dh/180)^2 + ws*ds^2 + wv*dv^2) with
// weights normalized to sum 1 so d stays in [0,1]. Restricted to mask pixels
// when a mask is given; an all-false mask yields distance 0 by convention
// (nothing to compare). Shapes must match.
double hsv_distance_mean(const Grid3& a, const Grid3& b, const HsvWeights& weights,
                         const Mask3* mask = nullptr);

// score = 1 - hsv_distance_mean.
JudgeVerdict hsv_similarity_judge(const ImageFrame& frame, const ImageFrame& reference,
                                  const HsvWeights& weights = {}, const Mask3* mask = nullptr);

// Last occurrence of "Final probability score:" followed by a decimal number;
// tolerates whitespace, markdown emphasis, quotes, and a trailing period.
// Falls back to scanning a well-formed JSON body for the same key phrase.
// Returns the value clamped to [0,1]; nullopt when no score line exists.
// `clamped` reports whether the raw value fell outside [0,1].
std::optional<double> parse_vlm_response(const std::string& text, bool* clamped = nullptr);

// Arithmetic mean of the provided (t, S_t) samples, Kahan-compensated.
// With stride 1 the list must cover t = 0..T and the result is exactly
// sum(S_t) / (T+1).
double aggregate_scores(const std::vector<std::pair<int, double>>& scores, int T, int stride);

// Everything a backend may look at besides the frame itself.
struct JudgeContext {
    const ImageFrame* reference = nullptr;
    const Mask3* object_mask = nullptr;
    int frame_index = 0;
};

class JudgeBackend {
public:
    virtual ~JudgeBackend() = default;
    virtual JudgeVerdict judge_frame(const ImageFrame& frame, const JudgeContext& ctx) = 0;
    virtual bool differentiable() const { return false; }
    virtual std::string name() const = 0;
};

// Fixed-score judge; also serves as the "no judge" baseline at value 1.
class ConstJudge final : public JudgeBackend {
public:
    explicit ConstJudge(double value);
    JudgeVerdict judge_frame(const ImageFrame& frame, const JudgeContext& ctx) override;
    std::string name() const override { return "const"; }

private:
    double value_;
};

class HsvJudge final : public JudgeBackend {
public:
    explicit HsvJudge(HsvWeights weights = {}) : weights_(weights) {}
    JudgeVerdict judge_frame(const ImageFrame& frame, const JudgeContext& ctx) override;
    std::string name() const override { return "hsv"; }

private:
    HsvWeights weights_;
};

// Deterministic offline stand-in for the rubric: color similarity comes from
// the HSV judge rounded to 0..10, the other three criteria are fixed by config.
class RubricJudge final : public JudgeBackend {
public:
    RubricJudge(int law, int appearance, int recreation, HsvWeights weights = {});
    JudgeVerdict judge_frame(const ImageFrame& frame, const JudgeContext& ctx) override;
    std::string name() const override { return "rubric"; }

private:
    int law_, appearance_, recreation_;
    HsvWeights weights_;
};

// Builds the configured backend; "none" maps to a const judge pinned to 1.
// The vlm backend is constructed through make_vlm_judge (separate header).
std::unique_ptr<JudgeBackend> make_offline_judge(const JudgeSettings& settings);

}  // namespace advtex
