#pragma once

#include <string>
#include <vector>

#include "advtex/grid.hpp"
#include "advtex/judge.hpp"

namespace advtex {

struct LabeledImage {
    std::string path;
    ImageFrame image;
    double label = 0.0;
    // Reference for similarity-style backends; null for self-contained ones.
    const ImageFrame* reference = nullptr;
};

struct JudgeEvalReport {
    double mae = 0.0;
    double rank_correlation = 0.0;
    bool rank_defined = false;  // false when either list is constant
    std::vector<double> mean_scores;
    std::vector<double> repeat_variance;  // population variance over k repeats
    double max_repeat_variance = 0.0;
    int n = 0;         // images included
    int failures = 0;  // images excluded because the backend failed
};

// Spearman rho: average ranks for ties, Pearson correlation of rank vectors.
// `defined` turns false (and the result is 0) when either list is constant.
double rank_correlation(const std::vector<double>& xs, const std::vector<double>& ys,
                        bool* defined = nullptr);

// Scores every image k times, averages per image, and reports MAE against the
// labels, Spearman rank correlation, and the per-image repeat variance.
// Backend failures exclude the image and are counted.
JudgeEvalReport evaluate_judge(JudgeBackend& backend, const std::vector<LabeledImage>& items,
                               int repeats, int jobs = 1);

}  // namespace advtex
