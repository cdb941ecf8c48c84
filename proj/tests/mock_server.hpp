#pragma once

// Loopback HTTP server for client tests. Runs on an ephemeral port in a
// background thread.

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace mock {

struct Request {
  std::string path;
  std::string body;
  std::string authorization;
};

struct Reply {
  int status = 200;
  std::string body;
  std::chrono::milliseconds delay{0};
};

using Handler = std::function<Reply(const Request&)>;

class Server {
 public:
  Server();
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void on(const std::string& path, Handler handler);
  void start();

  std::string url() const;
  std::vector<Request> requests() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mock
