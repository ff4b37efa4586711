#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>

// Local completions endpoint with a swappable handler, for wire-protocol
// tests against the HTTP provider.

namespace elmia::testsupport {

class StubServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  StubServer() {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      Handler h;
      {
        std::lock_guard lock(mu_);
        h = handler_;
        last_request_ = std::make_shared<httplib::Request>(req);
      }
      if (h) h(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  void set_handler(Handler h) {
    std::lock_guard lock(mu_);
    handler_ = std::move(h);
  }

  std::shared_ptr<httplib::Request> last_request() {
    std::lock_guard lock(mu_);
    return last_request_;
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  Handler handler_;
  std::shared_ptr<httplib::Request> last_request_;
};

}  // namespace elmia::testsupport
