#include "advtex/vlm_judge.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <semaphore>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "advtex/errors.hpp"
#include "advtex/hash.hpp"
#include "advtex/image_io.hpp"

namespace advtex {

std::string base64_encode(const unsigned char* data, size_t n) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((n + 2) / 3 * 4);
    for (size_t i = 0; i < n; i += 3) {
        uint32_t chunk = static_cast<uint32_t>(data[i]) << 16;
        if (i + 1 < n) chunk |= static_cast<uint32_t>(data[i + 1]) << 8;
        if (i + 2 < n) chunk |= static_cast<uint32_t>(data[i + 2]);
        out.push_back(alphabet[(chunk >> 18) & 0x3f]);
        out.push_back(alphabet[(chunk >> 12) & 0x3f]);
        out.push_back(i + 1 < n ? alphabet[(chunk >> 6) & 0x3f] : '=');
        out.push_back(i + 2 < n ? alphabet[chunk & 0x3f] : '=');
    }
    return out;
}

namespace {

std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

struct Endpoint {
    std::string host;
    int port = 80;
    std::string path_prefix;  // without trailing slash
};

Endpoint parse_base_url(const std::string& url) {
    const std::string scheme = "http://";
    if (url.rfind(scheme, 0) != 0)
        throw ValidationError("vlm base_url must start with http:// (TLS is not built in)");
    std::string rest = url.substr(scheme.size());
    Endpoint ep;
    auto slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    if (slash != std::string::npos) {
        ep.path_prefix = rest.substr(slash);
        while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
    }
    auto colon = hostport.rfind(':');
    if (colon != std::string::npos) {
        ep.host = hostport.substr(0, colon);
        ep.port = std::atoi(hostport.c_str() + colon + 1);
        if (ep.port <= 0) throw ValidationError("vlm base_url has an invalid port");
    } else {
        ep.host = hostport;
    }
    if (ep.host.empty()) throw ValidationError("vlm base_url has an empty host");
    return ep;
}

class VlmJudge final : public JudgeBackend {
public:
    explicit VlmJudge(VlmSettings settings)
        : settings_(std::move(settings)),
          endpoint_(parse_base_url(settings_.base_url)),
          inflight_(settings_.max_inflight) {
        if (settings_.prompt_path.empty())
            throw ValidationError("vlm judge requires prompt_path");
        std::ifstream in(settings_.prompt_path);
        if (!in) throw IoError("cannot read prompt template: " + settings_.prompt_path);
        std::ostringstream ss;
        ss << in.rdbuf();
        const std::string prompt = ss.str();
        const std::string slot = "{inference image}";
        const auto pos = prompt.find(slot);
        if (pos == std::string::npos)
            throw ValidationError("prompt template is missing the {inference image} slot");
        prompt_prefix_ = prompt.substr(0, pos);
        prompt_suffix_ = prompt.substr(pos + slot.size());

        if (const char* tok = std::getenv(settings_.auth_env.c_str()); tok && *tok) token_ = tok;

        if (!settings_.transcript_log.empty()) {
            log_.open(settings_.transcript_log, std::ios::app);
            if (!log_) throw IoError("cannot open transcript log: " + settings_.transcript_log);
        }
    }

    JudgeVerdict judge_frame(const ImageFrame& frame, const JudgeContext&) override {
        const std::vector<unsigned char> png = encode_png(frame);
        const std::string frame_hash = hex64(fnv1a64(png.data(), png.size()));
        const std::string body = request_body(png);

        inflight_.acquire();
        struct Release {
            std::counting_semaphore<>& sem;
            ~Release() { sem.release(); }
        } release{inflight_};

        std::string last_failure;
        for (int attempt = 1; attempt <= settings_.max_attempts; ++attempt) {
            if (attempt > 1) {
                const auto delay = std::chrono::milliseconds(
                    static_cast<long long>(settings_.backoff_ms) << (attempt - 2));
                std::this_thread::sleep_for(delay);
            }

            httplib::Client cli(endpoint_.host, endpoint_.port);
            const int timeout_s = std::max(1, static_cast<int>(settings_.timeout_s));
            cli.set_connection_timeout(timeout_s, 0);
            cli.set_read_timeout(timeout_s, 0);
            cli.set_write_timeout(timeout_s, 0);

            httplib::Headers headers;
            if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

            const std::string path = endpoint_.path_prefix.empty()
                                         ? "/v1/chat/completions"
                                         : endpoint_.path_prefix + "/chat/completions";
            auto res = cli.Post(path, headers, body, "application/json");

            if (!res) {
                last_failure = "connection failed: " + httplib::to_string(res.error());
                log_attempt(frame_hash, attempt, -1, last_failure, std::nullopt);
                continue;  // transient
            }
            if (res->status == 429 || res->status >= 500) {
                last_failure = "http status " + std::to_string(res->status);
                log_attempt(frame_hash, attempt, res->status, res->body, std::nullopt);
                continue;  // transient
            }
            if (res->status != 200) {
                log_attempt(frame_hash, attempt, res->status, res->body, std::nullopt);
                throw NetworkError("vlm endpoint returned http status " +
                                   std::to_string(res->status));
            }

            const std::string content = extract_content(res->body);
            const std::optional<double> score = parse_vlm_response(content);
            log_attempt(frame_hash, attempt, res->status, res->body, score);
            if (!score)
                throw JudgeError("vlm response carries no probability score; raw reply: " +
                                 truncate(content));
            JudgeVerdict v;
            v.score = *score;
            v.rationale = content;
            return v;
        }
        throw NetworkError("vlm request failed after " + std::to_string(settings_.max_attempts) +
                           " attempts; last error: " + last_failure);
    }

    std::string name() const override { return "vlm"; }

private:
    std::string request_body(const std::vector<unsigned char>& png) const {
        nlohmann::json content = nlohmann::json::array();
        content.push_back({{"type", "text"}, {"text", prompt_prefix_}});
        content.push_back(
            {{"type", "image_url"},
             {"image_url",
              {{"url", "data:image/png;base64," + base64_encode(png.data(), png.size())}}}});
        if (!prompt_suffix_.empty())
            content.push_back({{"type", "text"}, {"text", prompt_suffix_}});
        nlohmann::json req = {
            {"model", settings_.model},
            {"temperature", settings_.temperature},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
        };
        return req.dump();
    }

    static std::string truncate(const std::string& s) {
        return s.size() <= 200 ? s : s.substr(0, 200) + "...";
    }

    static std::string extract_content(const std::string& body) {
        nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded()) throw JudgeError("vlm response body is not JSON: " + truncate(body));
        if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
            throw JudgeError("vlm response has no choices: " + truncate(body));
        const auto& msg = j["choices"][0];
        if (!msg.contains("message") || !msg["message"].contains("content") ||
            !msg["message"]["content"].is_string())
            throw JudgeError("vlm response has no message content: " + truncate(body));
        return msg["message"]["content"].get<std::string>();
    }

    void log_attempt(const std::string& frame_hash, int attempt, int status,
                     const std::string& raw, std::optional<double> score) {
        if (!log_.is_open()) return;
        nlohmann::json rec = {
            {"timestamp", iso8601_now()},
            {"frame_hash", frame_hash},
            {"attempt", attempt},
            {"status", status},
            {"raw_response", raw},
        };
        if (score)
            rec["parsed_score"] = *score;
        else
            rec["parsed_score"] = nullptr;
        std::lock_guard<std::mutex> lock(log_mu_);
        log_ << rec.dump() << '\n';
        log_.flush();
    }

    VlmSettings settings_;
    Endpoint endpoint_;
    std::string prompt_prefix_, prompt_suffix_;
    std::string token_;
    std::counting_semaphore<> inflight_;
    std::mutex log_mu_;
    std::ofstream log_;
};

}  // namespace

std::unique_ptr<JudgeBackend> make_vlm_judge(const VlmSettings& settings) {
    return std::make_unique<VlmJudge>(settings);
}

}  // namespace advtex
