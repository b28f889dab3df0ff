#include "http_post.hpp"

#include <httplib.h>

#include "voicepilot/error.hpp"

namespace voicepilot::detail {

HttpReply http_post(const std::string& url, const std::string& bearer_token,
                    const std::string& body, const std::string& content_type) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw BackendUnavailable("malformed URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(5);
  client.set_read_timeout(60);
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

  auto res = client.Post(path, headers, body, content_type);
  if (!res) {
    throw BackendUnavailable("POST " + url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendUnavailable("POST " + url + " returned HTTP " + std::to_string(res->status));
  }
  return {res->status, res->body};
}

}  // namespace voicepilot::detail
