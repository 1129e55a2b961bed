#pragma once

#include <memory>
#include <string>

#include "advtex/config.hpp"
#include "advtex/judge.hpp"

namespace advtex {

// Remote chat-completions judge: encodes the frame as PNG, sends the bundled
// prompt template plus the image, parses "Final probability score" from the
// reply. Retries transient failures with exponential backoff; logs every
// exchange to a JSONL audit file when configured. In-flight requests are
// bounded by settings.max_inflight; the auth token is read from the
// environment variable named by settings.auth_env (requests go out without
// an Authorization header when it is unset, which local mock servers accept).
std::unique_ptr<JudgeBackend> make_vlm_judge(const VlmSettings& settings);

std::string base64_encode(const unsigned char* data, size_t n);

}  // namespace advtex
