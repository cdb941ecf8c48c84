#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dialectrag::http {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path prefix without trailing slash, may be empty
};

Url parse_url(const std::string& url);

struct Response {
  int status = 0;
  std::string body;
};

/// Synchronous JSON POST. Returns nullopt on transport failure (connection
/// refused, timeout); `transport_error` then holds a description.
std::optional<Response> post_json(const Url& base, const std::string& path, const std::string& body,
                                  std::chrono::milliseconds timeout,
                                  const std::vector<std::pair<std::string, std::string>>& headers,
                                  std::string* transport_error = nullptr, bool* timed_out = nullptr);

}  // namespace dialectrag::http
