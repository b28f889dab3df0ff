#pragma once

#include <string>
#include <vector>

namespace voicepilot::detail {

struct HttpReply {
  int status = 0;
  std::string body;
};

// Blocking POST; throws BackendUnavailable on connection failure or a
// non-2xx status.
HttpReply http_post(const std::string& url, const std::string& bearer_token,
                    const std::string& body, const std::string& content_type);

}  // namespace voicepilot::detail
