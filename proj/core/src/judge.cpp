#include "advtex/judge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string_view>

#include <nlohmann/json.hpp>

#include "advtex/color.hpp"
#include "advtex/errors.hpp"

namespace advtex {

void RubricScores::validate() const {
    auto ok = [](int v) { return v >= 0 && v <= 10; };
    if (!ok(color_similarity) || !ok(law_of_traffic) || !ok(real_life_appearance) ||
        !ok(real_life_recreation))
        throw ValidationError("rubric criteria must be in 0..10");
}

double rubric_score(const RubricScores& scores) {
    scores.validate();
    return (scores.color_similarity / 10.0) * 0.5 + (scores.law_of_traffic / 10.0) * 0.3 +
           (scores.real_life_appearance / 10.0) * 0.15 +
           (scores.real_life_recreation / 10.0) * 0.05;
}

double hsv_distance_mean(const Grid3& a, const Grid3& b, const HsvWeights& weights,
                         const Mask3* mask) {
    if (!a.same_shape(b)) throw ValidationError("hsv distance requires matching shapes");
    if (a.channels() != 3) throw ValidationError("hsv distance requires 3 channels");
    if (mask && (mask->height() != a.height() || mask->width() != a.width()))
        throw ValidationError("mask dims do not match image");

    const double wsum = weights.h + weights.s + weights.v;
    if (!(wsum > 0.0)) throw ValidationError("hsv weights must not all be zero");
    const double wh = weights.h / wsum;
    const double ws = weights.s / wsum;
    const double wv = weights.v / wsum;

    // Kahan-compensated accumulation keeps the mean stable across pixel order.
    double sum = 0.0, comp = 0.0;
    size_t n = 0;
    for (int r = 0; r < a.height(); ++r) {
        for (int c = 0; c < a.width(); ++c) {
            if (mask && !mask->at(r, c, 0)) continue;
            Hsv pa = rgb_to_hsv(a.at(r, c, 0), a.at(r, c, 1), a.at(r, c, 2));
            Hsv pb = rgb_to_hsv(b.at(r, c, 0), b.at(r, c, 1), b.at(r, c, 2));
            const double dh = circular_hue_delta(pa.h, pb.h) / 180.0;
            const double ds = pa.s - pb.s;
            const double dv = pa.v - pb.v;
            const double d = std::sqrt(wh * dh * dh + ws * ds * ds + wv * dv * dv);
            const double y = d - comp;
            const double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            ++n;
        }
    }
    if (n == 0) return 0.0;
    return sum / static_cast<double>(n);
}

JudgeVerdict hsv_similarity_judge(const ImageFrame& frame, const ImageFrame& reference,
                                  const HsvWeights& weights, const Mask3* mask) {
    JudgeVerdict v;
    v.score = 1.0 - hsv_distance_mean(frame.pixels, reference.pixels, weights, mask);
    v.score = std::clamp(v.score, 0.0, 1.0);
    return v;
}

namespace {

constexpr std::string_view kScorePhrase = "final probability score";

bool phrase_at(const std::string& text, size_t pos) {
    if (pos + kScorePhrase.size() > text.size()) return false;
    for (size_t i = 0; i < kScorePhrase.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(text[pos + i])) != kScorePhrase[i])
            return false;
    return true;
}

// Parses a decimal right after the phrase, skipping separator characters
// (colon, whitespace, markdown emphasis, quotes).
std::optional<double> number_after(const std::string& text, size_t pos) {
    size_t i = pos;
    while (i < text.size()) {
        char ch = text[i];
        if (ch == ':' || ch == '*' || ch == '_' || ch == '"' || ch == '\'' || ch == '`' ||
            ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n' || ch == '=')
            ++i;
        else
            break;
    }
    size_t start = i;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) ++i;
    size_t digits_from = i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    if (i < text.size() && text[i] == '.') {
        ++i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    }
    if (i == digits_from || (i == digits_from + 1 && text[digits_from] == '.'))
        return std::nullopt;
    try {
        return std::stod(text.substr(start, i - start));
    } catch (...) {
        return std::nullopt;
    }
}

std::string normalized_key(const std::string& key) {
    std::string out;
    for (char ch : key)
        if (std::isalpha(static_cast<unsigned char>(ch)))
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    return out;
}

void scan_json(const nlohmann::json& node, std::optional<double>& found) {
    if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it) {
            if (normalized_key(it.key()) == "finalprobabilityscore") {
                if (it.value().is_number())
                    found = it.value().get<double>();
                else if (it.value().is_string()) {
                    if (auto v = number_after(it.value().get<std::string>(), 0)) found = v;
                }
            }
            scan_json(it.value(), found);
        }
    } else if (node.is_array()) {
        for (const auto& item : node) scan_json(item, found);
    } else if (node.is_string()) {
        const std::string s = node.get<std::string>();
        for (size_t p = 0; p < s.size(); ++p) {
            if (!phrase_at(s, p)) continue;
            if (auto v = number_after(s, p + kScorePhrase.size())) found = v;
        }
    }
}

}  // namespace

std::optional<double> parse_vlm_response(const std::string& text, bool* clamped) {
    if (clamped) *clamped = false;

    std::optional<double> raw;
    for (size_t p = 0; p < text.size(); ++p) {
        if (!phrase_at(text, p)) continue;
        if (auto v = number_after(text, p + kScorePhrase.size())) raw = v;  // keep the LAST match
    }

    if (!raw) {
        // Fallback: a well-formed JSON body carrying the key phrase.
        std::string body = text;
        // Strip a markdown code fence if the whole body is wrapped in one.
        auto first = body.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && body.compare(first, 3, "```") == 0) {
            auto nl = body.find('\n', first);
            auto close = body.rfind("```");
            if (nl != std::string::npos && close > nl) body = body.substr(nl + 1, close - nl - 1);
        }
        nlohmann::json parsed = nlohmann::json::parse(body, nullptr, false);
        if (!parsed.is_discarded()) scan_json(parsed, raw);
    }

    if (!raw) return std::nullopt;
    if (*raw < 0.0 || *raw > 1.0) {
        if (clamped) *clamped = true;
        return std::clamp(*raw, 0.0, 1.0);
    }
    return raw;
}

double aggregate_scores(const std::vector<std::pair<int, double>>& scores, int T, int stride) {
    if (scores.empty()) throw ValidationError("aggregate requires at least one score");
    if (stride < 1) throw ValidationError("judge_stride must be >= 1");
    if (stride == 1 && static_cast<int>(scores.size()) != T + 1)
        throw ValidationError("stride-1 aggregation requires scores for t = 0..T");
    double sum = 0.0, comp = 0.0;
    for (const auto& [t, s] : scores) {
        const double y = s - comp;
        const double tt = sum + y;
        comp = (tt - sum) - y;
        sum = tt;
    }
    return sum / static_cast<double>(scores.size());
}

ConstJudge::ConstJudge(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) throw ValidationError("const judge value must be in [0,1]");
}

JudgeVerdict ConstJudge::judge_frame(const ImageFrame&, const JudgeContext&) {
    return JudgeVerdict{value_, "", std::nullopt};
}

JudgeVerdict HsvJudge::judge_frame(const ImageFrame& frame, const JudgeContext& ctx) {
    if (!ctx.reference) throw JudgeError("hsv judge requires a reference frame");
    return hsv_similarity_judge(frame, *ctx.reference, weights_, ctx.object_mask);
}

RubricJudge::RubricJudge(int law, int appearance, int recreation, HsvWeights weights)
    : law_(law), appearance_(appearance), recreation_(recreation), weights_(weights) {
    RubricScores probe{10, law, appearance, recreation};
    probe.validate();
}

JudgeVerdict RubricJudge::judge_frame(const ImageFrame& frame, const JudgeContext& ctx) {
    if (!ctx.reference) throw JudgeError("rubric judge requires a reference frame");
    const double hsv =
        hsv_similarity_judge(frame, *ctx.reference, weights_, ctx.object_mask).score;
    RubricScores scores;
    scores.color_similarity =
        std::clamp(static_cast<int>(std::lround(10.0 * hsv)), 0, 10);
    scores.law_of_traffic = law_;
    scores.real_life_appearance = appearance_;
    scores.real_life_recreation = recreation_;
    JudgeVerdict v;
    v.score = rubric_score(scores);
    v.breakdown = scores;
    return v;
}

std::unique_ptr<JudgeBackend> make_offline_judge(const JudgeSettings& settings) {
    HsvWeights w{settings.hsv_weight_h, settings.hsv_weight_s, settings.hsv_weight_v};
    if (settings.backend == "hsv") return std::make_unique<HsvJudge>(w);
    if (settings.backend == "rubric")
        return std::make_unique<RubricJudge>(settings.rubric_law, settings.rubric_appearance,
                                             settings.rubric_recreation, w);
    if (settings.backend == "const") return std::make_unique<ConstJudge>(settings.const_value);
    if (settings.backend == "none") return std::make_unique<ConstJudge>(1.0);
    throw ValidationError("offline judge backend must be hsv|rubric|const|none");
}

}  // namespace advtex
