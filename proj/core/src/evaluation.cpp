#include "advtex/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advtex/errors.hpp"
#include "advtex/parallel.hpp"

namespace advtex {

namespace {

// Ranks with ties sharing the average of the positions they occupy.
std::vector<double> average_ranks(const std::vector<double>& xs) {
    const size_t n = xs.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double rank_correlation(const std::vector<double>& xs, const std::vector<double>& ys,
                        bool* defined) {
    if (xs.size() != ys.size()) throw ValidationError("rank correlation needs equal lengths");
    if (xs.empty()) throw ValidationError("rank correlation needs at least one pair");
    if (defined) *defined = true;

    const std::vector<double> rx = average_ranks(xs);
    const std::vector<double> ry = average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    const double mean = (n + 1.0) / 2.0;

    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        if (defined) *defined = false;
        return 0.0;
    }
    return sxy / std::sqrt(sxx * syy);
}

JudgeEvalReport evaluate_judge(JudgeBackend& backend, const std::vector<LabeledImage>& items,
                               int repeats, int jobs) {
    if (items.empty()) throw ValidationError("evaluation needs a nonempty labeled set");
    if (repeats < 1) throw ValidationError("repeats must be >= 1");

    struct PerImage {
        double mean = 0.0;
        double variance = 0.0;
        bool failed = false;
    };
    std::vector<PerImage> results(items.size());

    parallel_for(items.size(), jobs, [&](size_t i) {
        const LabeledImage& item = items[i];
        JudgeContext ctx;
        ctx.reference = item.reference;
        ctx.frame_index = static_cast<int>(i);
        std::vector<double> scores;
        scores.reserve(repeats);
        try {
            for (int r = 0; r < repeats; ++r)
                scores.push_back(backend.judge_frame(item.image, ctx).score);
        } catch (const Error&) {
            results[i].failed = true;
            return;
        }
        // Deviations from the first sample: when every repeat returns the same
        // score the mean is exactly that score and the variance exactly zero.
        const double base = scores.front();
        double shift = 0.0;
        for (double s : scores) shift += s - base;
        const double mean = base + shift / static_cast<double>(scores.size());
        double var = 0.0;
        for (double s : scores) var += (s - mean) * (s - mean);
        var /= static_cast<double>(scores.size());
        results[i].mean = mean;
        results[i].variance = var;
    });

    JudgeEvalReport report;
    std::vector<double> labels;
    for (size_t i = 0; i < items.size(); ++i) {
        if (results[i].failed) {
            report.failures += 1;
            continue;
        }
        report.mean_scores.push_back(results[i].mean);
        report.repeat_variance.push_back(results[i].variance);
        report.max_repeat_variance = std::max(report.max_repeat_variance, results[i].variance);
        labels.push_back(items[i].label);
    }
    report.n = static_cast<int>(labels.size());
    if (report.n == 0) throw JudgeError("every image failed evaluation");

    double mae = 0.0;
    for (size_t i = 0; i < labels.size(); ++i)
        mae += std::fabs(report.mean_scores[i] - labels[i]);
    report.mae = mae / static_cast<double>(labels.size());
    report.rank_correlation = rank_correlation(report.mean_scores, labels, &report.rank_defined);
    return report;
}

}  // namespace advtex
