#include "advtex/config.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include "advtex/errors.hpp"

namespace advtex {

namespace {

std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return {};
    auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
}

struct KvDocument {
    // section.key -> raw value string
    std::map<std::string, std::string> entries;
    std::set<std::string> consumed;
    std::filesystem::path base_dir;

    bool has(const std::string& key) const { return entries.count(key) != 0; }

    std::string raw(const std::string& key) {
        consumed.insert(key);
        return entries.at(key);
    }

    double number(const std::string& key) {
        std::string v = raw(key);
        const char* begin = v.c_str();
        char* end = nullptr;
        double d = std::strtod(begin, &end);
        if (end == begin || *end != '\0')
            throw ParseError("config key '" + key + "' expects a number, got '" + v + "'");
        return d;
    }

    long long integer(const std::string& key) {
        double d = number(key);
        auto r = static_cast<long long>(d);
        if (static_cast<double>(r) != d)
            throw ParseError("config key '" + key + "' expects an integer");
        return r;
    }

    std::string text(const std::string& key) {
        std::string v = raw(key);
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
            return v.substr(1, v.size() - 2);
        return v;
    }

    std::string path_value(const std::string& key) {
        std::string p = text(key);
        if (p.empty()) return p;
        std::filesystem::path fp(p);
        if (fp.is_relative()) fp = base_dir / fp;
        return fp.lexically_normal().string();
    }
};

KvDocument parse_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    KvDocument doc;
    doc.base_dir = std::filesystem::absolute(std::filesystem::path(path)).parent_path();
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) {
            // a # inside quotes is part of the value
            auto q1 = line.find('"');
            if (q1 == std::string::npos || q1 > hash) line = line.substr(0, hash);
        }
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ParseError(path + ":" + std::to_string(lineno) + ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw ParseError(path + ":" + std::to_string(lineno) + ": empty section name");
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ParseError(path + ":" + std::to_string(lineno) + ": empty key");
        std::string full = section.empty() ? key : section + "." + key;
        if (doc.entries.count(full))
            throw ParseError(path + ":" + std::to_string(lineno) + ": duplicate key '" + full + "'");
        doc.entries[full] = value;
    }
    return doc;
}

// Angles may be given in radians or degrees via an explicit unit suffix.
std::optional<double> angle_key(KvDocument& doc, const std::string& stem) {
    const std::string rad_key = stem + "_rad";
    const std::string deg_key = stem + "_deg";
    if (doc.has(rad_key) && doc.has(deg_key))
        throw ValidationError("config gives both " + rad_key + " and " + deg_key);
    if (doc.has(rad_key)) return doc.number(rad_key);
    if (doc.has(deg_key)) return doc.number(deg_key) * std::numbers::pi / 180.0;
    return std::nullopt;
}

}  // namespace

void SceneConfig::validate() const {
    if (horizon < 1) throw ValidationError("horizon must be >= 1");
    if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
    if (image_height < 16) throw ValidationError("image_height must be >= 16");
    if (image_width < 16) throw ValidationError("image_width must be >= 16");
    if (!(camera_focal_px > 0.0)) throw ValidationError("camera_focal_px must be > 0");
    if (!(object_width > 0.0)) throw ValidationError("object_width must be > 0");
    if (!(object_height > 0.0)) throw ValidationError("object_height must be > 0");
    if (texture_height < 1) throw ValidationError("texture_height must be >= 1");
    if (texture_width < 1) throw ValidationError("texture_width must be >= 1");
    if (!(ego_speed >= 0.0)) throw ValidationError("ego_speed must be >= 0");
    if (!(policy_u_max > 0.0)) throw ValidationError("policy_u_max must be > 0");
    if (!(camera_height_m > 0.0)) throw ValidationError("camera_height_m must be > 0");
}

void JudgeSettings::validate() const {
    if (backend != "hsv" && backend != "rubric" && backend != "const" && backend != "vlm" &&
        backend != "none")
        throw ValidationError("judge backend must be one of hsv|rubric|const|vlm|none");
    if (!(hsv_weight_h >= 0.0 && hsv_weight_s >= 0.0 && hsv_weight_v >= 0.0))
        throw ValidationError("hsv weights must be >= 0");
    if (hsv_weight_h + hsv_weight_s + hsv_weight_v <= 0.0)
        throw ValidationError("hsv weights must not all be zero");
    auto in_rubric_range = [](int v) { return v >= 0 && v <= 10; };
    if (!in_rubric_range(rubric_law) || !in_rubric_range(rubric_appearance) ||
        !in_rubric_range(rubric_recreation))
        throw ValidationError("rubric criteria must be in 0..10");
    if (!(const_value >= 0.0 && const_value <= 1.0))
        throw ValidationError("const_value must be in [0,1]");
    if (failure_fallback != "abort" && failure_fallback != "last")
        throw ValidationError("failure_fallback must be abort|last");
    if (vlm.max_inflight < 1) throw ValidationError("vlm max_inflight must be >= 1");
    if (vlm.max_attempts < 1) throw ValidationError("vlm max_attempts must be >= 1");
    if (!(vlm.timeout_s > 0.0)) throw ValidationError("vlm timeout_s must be > 0");
}

void RunConfig::validate() const {
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
    if (judge_stride < 1) throw ValidationError("judge_stride must be >= 1");
    if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0)) throw ValidationError("adam_beta1 must be in (0,1)");
    if (!(adam.beta2 > 0.0 && adam.beta2 < 1.0)) throw ValidationError("adam_beta2 must be in (0,1)");
    if (!(adam.step > 0.0)) throw ValidationError("adam_step must be > 0");
    if (!(adam.eps > 0.0)) throw ValidationError("adam_eps must be > 0");
    if (iterations < 0) throw ValidationError("iterations must be >= 0");
    if (!(subtlety_weight >= 0.0)) throw ValidationError("subtlety_weight must be >= 0");
    if (!(subtlety_delta_min >= 0.0)) throw ValidationError("subtlety_delta_min must be >= 0");
    if (judge_every_n_iters < 1) throw ValidationError("judge_every_n_iters must be >= 1");
    if (checkpoint_every < 0) throw ValidationError("checkpoint_every must be >= 0");
    if (!(early_stop_s_floor >= 0.0 && early_stop_s_floor <= 1.0))
        throw ValidationError("early_stop_s_floor must be in [0,1]");
    if (early_stop_patience < 1) throw ValidationError("early_stop_patience must be >= 1");
    judge.validate();
}

std::pair<SceneConfig, RunConfig> load_config(const std::string& path) {
    KvDocument doc = parse_document(path);
    SceneConfig scene;
    RunConfig run;

    auto num = [&](const std::string& key, double& target) {
        if (doc.has(key)) target = doc.number(key);
    };
    auto inum = [&](const std::string& key, int& target) {
        if (doc.has(key)) target = static_cast<int>(doc.integer(key));
    };
    auto str = [&](const std::string& key, std::string& target) {
        if (doc.has(key)) target = doc.text(key);
    };
    auto pathv = [&](const std::string& key, std::string& target) {
        if (doc.has(key)) target = doc.path_value(key);
    };

    num("scene.object_x", scene.object_x);
    num("scene.object_y", scene.object_y);
    if (auto a = angle_key(doc, "scene.object_yaw")) scene.object_yaw = *a;
    num("scene.object_width", scene.object_width);
    num("scene.object_height", scene.object_height);
    num("scene.camera_focal_px", scene.camera_focal_px);
    inum("scene.image_height", scene.image_height);
    inum("scene.image_width", scene.image_width);
    // principal point defaults track the image dims unless given explicitly
    scene.camera_cx = scene.image_width / 2.0;
    scene.camera_cy = scene.image_height / 2.0;
    num("scene.camera_cx", scene.camera_cx);
    num("scene.camera_cy", scene.camera_cy);
    num("scene.camera_forward_m", scene.camera_forward_m);
    num("scene.camera_lateral_m", scene.camera_lateral_m);
    num("scene.camera_height_m", scene.camera_height_m);
    inum("scene.horizon", scene.horizon);
    num("scene.dt", scene.dt);
    num("scene.target_offset", scene.target_offset);
    num("scene.ego_x", scene.ego_x);
    num("scene.ego_y", scene.ego_y);
    if (auto a = angle_key(doc, "scene.ego_heading")) scene.ego_heading = *a;
    num("scene.ego_speed", scene.ego_speed);
    inum("scene.texture_height", scene.texture_height);
    inum("scene.texture_width", scene.texture_width);
    pathv("scene.texture_png", scene.texture_png);
    pathv("scene.freeze_mask_png", scene.freeze_mask_png);
    num("scene.policy_gain", scene.policy_gain);
    num("scene.policy_u_max", scene.policy_u_max);

    num("run.epsilon", run.epsilon);
    inum("run.judge_stride", run.judge_stride);
    num("run.adam_step", run.adam.step);
    num("run.adam_beta1", run.adam.beta1);
    num("run.adam_beta2", run.adam.beta2);
    num("run.adam_eps", run.adam.eps);
    inum("run.iterations", run.iterations);
    if (doc.has("run.seed")) {
        std::string s = doc.raw("run.seed");
        char* end = nullptr;
        unsigned long long v = std::strtoull(s.c_str(), &end, 10);
        // strtoull silently wraps negative inputs, so reject the sign up front
        if (s.empty() || s[0] == '-' || end == s.c_str() || *end != '\0')
            throw ParseError("config key 'run.seed' expects an unsigned integer");
        run.seed = v;
    }
    num("run.subtlety_weight", run.subtlety_weight);
    num("run.subtlety_delta_min", run.subtlety_delta_min);
    inum("run.judge_every_n_iters", run.judge_every_n_iters);
    inum("run.checkpoint_every", run.checkpoint_every);
    num("run.early_stop_s_floor", run.early_stop_s_floor);
    inum("run.early_stop_patience", run.early_stop_patience);

    str("judge.backend", run.judge.backend);
    num("judge.hsv_weight_h", run.judge.hsv_weight_h);
    num("judge.hsv_weight_s", run.judge.hsv_weight_s);
    num("judge.hsv_weight_v", run.judge.hsv_weight_v);
    inum("judge.rubric_law", run.judge.rubric_law);
    inum("judge.rubric_appearance", run.judge.rubric_appearance);
    inum("judge.rubric_recreation", run.judge.rubric_recreation);
    num("judge.const_value", run.judge.const_value);
    str("judge.failure_fallback", run.judge.failure_fallback);

    str("vlm.base_url", run.judge.vlm.base_url);
    str("vlm.model", run.judge.vlm.model);
    num("vlm.temperature", run.judge.vlm.temperature);
    str("vlm.auth_env", run.judge.vlm.auth_env);
    pathv("vlm.prompt_path", run.judge.vlm.prompt_path);
    num("vlm.timeout_s", run.judge.vlm.timeout_s);
    inum("vlm.max_inflight", run.judge.vlm.max_inflight);
    inum("vlm.max_attempts", run.judge.vlm.max_attempts);
    inum("vlm.backoff_ms", run.judge.vlm.backoff_ms);
    pathv("vlm.transcript_log", run.judge.vlm.transcript_log);

    for (const auto& [key, value] : doc.entries) {
        if (!doc.consumed.count(key))
            throw ValidationError("unknown config key '" + key + "'");
    }

    scene.validate();
    run.validate();
    return {scene, run};
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void save_config(const SceneConfig& scene, const RunConfig& run, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file: " + path);
    out << "[scene]\n";
    out << "object_x = " << fmt_double(scene.object_x) << "\n";
    out << "object_y = " << fmt_double(scene.object_y) << "\n";
    out << "object_yaw_rad = " << fmt_double(scene.object_yaw) << "\n";
    out << "object_width = " << fmt_double(scene.object_width) << "\n";
    out << "object_height = " << fmt_double(scene.object_height) << "\n";
    out << "camera_focal_px = " << fmt_double(scene.camera_focal_px) << "\n";
    out << "camera_cx = " << fmt_double(scene.camera_cx) << "\n";
    out << "camera_cy = " << fmt_double(scene.camera_cy) << "\n";
    out << "camera_forward_m = " << fmt_double(scene.camera_forward_m) << "\n";
    out << "camera_lateral_m = " << fmt_double(scene.camera_lateral_m) << "\n";
    out << "camera_height_m = " << fmt_double(scene.camera_height_m) << "\n";
    out << "image_height = " << scene.image_height << "\n";
    out << "image_width = " << scene.image_width << "\n";
    out << "horizon = " << scene.horizon << "\n";
    out << "dt = " << fmt_double(scene.dt) << "\n";
    out << "target_offset = " << fmt_double(scene.target_offset) << "\n";
    out << "ego_x = " << fmt_double(scene.ego_x) << "\n";
    out << "ego_y = " << fmt_double(scene.ego_y) << "\n";
    out << "ego_heading_rad = " << fmt_double(scene.ego_heading) << "\n";
    out << "ego_speed = " << fmt_double(scene.ego_speed) << "\n";
    out << "texture_height = " << scene.texture_height << "\n";
    out << "texture_width = " << scene.texture_width << "\n";
    if (!scene.texture_png.empty()) out << "texture_png = \"" << scene.texture_png << "\"\n";
    if (!scene.freeze_mask_png.empty())
        out << "freeze_mask_png = \"" << scene.freeze_mask_png << "\"\n";
    out << "policy_gain = " << fmt_double(scene.policy_gain) << "\n";
    out << "policy_u_max = " << fmt_double(scene.policy_u_max) << "\n";
    out << "\n[run]\n";
    out << "epsilon = " << fmt_double(run.epsilon) << "\n";
    out << "judge_stride = " << run.judge_stride << "\n";
    out << "adam_step = " << fmt_double(run.adam.step) << "\n";
    out << "adam_beta1 = " << fmt_double(run.adam.beta1) << "\n";
    out << "adam_beta2 = " << fmt_double(run.adam.beta2) << "\n";
    out << "adam_eps = " << fmt_double(run.adam.eps) << "\n";
    out << "iterations = " << run.iterations << "\n";
    out << "seed = " << run.seed << "\n";
    out << "subtlety_weight = " << fmt_double(run.subtlety_weight) << "\n";
    out << "subtlety_delta_min = " << fmt_double(run.subtlety_delta_min) << "\n";
    out << "judge_every_n_iters = " << run.judge_every_n_iters << "\n";
    out << "checkpoint_every = " << run.checkpoint_every << "\n";
    out << "early_stop_s_floor = " << fmt_double(run.early_stop_s_floor) << "\n";
    out << "early_stop_patience = " << run.early_stop_patience << "\n";
    out << "\n[judge]\n";
    out << "backend = \"" << run.judge.backend << "\"\n";
    out << "hsv_weight_h = " << fmt_double(run.judge.hsv_weight_h) << "\n";
    out << "hsv_weight_s = " << fmt_double(run.judge.hsv_weight_s) << "\n";
    out << "hsv_weight_v = " << fmt_double(run.judge.hsv_weight_v) << "\n";
    out << "rubric_law = " << run.judge.rubric_law << "\n";
    out << "rubric_appearance = " << run.judge.rubric_appearance << "\n";
    out << "rubric_recreation = " << run.judge.rubric_recreation << "\n";
    out << "const_value = " << fmt_double(run.judge.const_value) << "\n";
    out << "failure_fallback = \"" << run.judge.failure_fallback << "\"\n";
    out << "\n[vlm]\n";
    if (!run.judge.vlm.base_url.empty()) out << "base_url = \"" << run.judge.vlm.base_url << "\"\n";
    out << "model = \"" << run.judge.vlm.model << "\"\n";
    out << "temperature = " << fmt_double(run.judge.vlm.temperature) << "\n";
    out << "auth_env = \"" << run.judge.vlm.auth_env << "\"\n";
    if (!run.judge.vlm.prompt_path.empty())
        out << "prompt_path = \"" << run.judge.vlm.prompt_path << "\"\n";
    out << "timeout_s = " << fmt_double(run.judge.vlm.timeout_s) << "\n";
    out << "max_inflight = " << run.judge.vlm.max_inflight << "\n";
    out << "max_attempts = " << run.judge.vlm.max_attempts << "\n";
    out << "backoff_ms = " << run.judge.vlm.backoff_ms << "\n";
    if (!run.judge.vlm.transcript_log.empty())
        out << "transcript_log = \"" << run.judge.vlm.transcript_log << "\"\n";
    if (!out) throw IoError("failed writing config file: " + path);
}

}  // namespace advtex
