#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "dialectrag/http.hpp"

#include "dialectrag/error.hpp"

namespace dialectrag::http {

Url parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "URL must include a scheme: '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Url out;
  out.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) out.path = url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

std::optional<Response> post_json(const Url& base, const std::string& path, const std::string& body,
                                  std::chrono::milliseconds timeout,
                                  const std::vector<std::pair<std::string, std::string>>& headers,
                                  std::string* transport_error, bool* timed_out) {
  httplib::Client client(base.origin);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());

  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);

  auto result = client.Post(base.path + path, hdrs, body, "application/json");
  if (!result) {
    if (transport_error) *transport_error = httplib::to_string(result.error());
    if (timed_out) *timed_out = result.error() == httplib::Error::Read ||
                                result.error() == httplib::Error::Write ||
                                result.error() == httplib::Error::ConnectionTimeout;
    return std::nullopt;
  }
  return Response{result->status, result->body};
}

}  // namespace dialectrag::http
