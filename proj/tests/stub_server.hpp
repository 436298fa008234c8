#pragma once

#include <atomic>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "disas/classify.hpp"

namespace disas::test {

// In-process /v1/classify server scoring each span with the heuristic rules.
class StubServer {
 public:
  StubServer() {
    server_.Post("/v1/classify", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      if (fail_with_503 > 0) {
        --fail_with_503;
        res.status = 503;
        return;
      }
      if (reject_with_400) {
        res.status = 400;
        return;
      }
      const auto doc = nlohmann::json::parse(req.body);
      nlohmann::json results = nlohmann::json::array();
      for (const auto& r : doc.at("requests")) {
        const std::string text = r.at("text");
        nlohmann::json probs = nlohmann::json::array();
        for (const auto& s : r.at("spans")) {
          const std::size_t a = s.at("start"), b = s.at("end");
          probs.push_back(HeuristicClassifier::score(std::string_view(text).substr(a, b - a)));
        }
        if (short_results) probs.erase(probs.begin());
        results.push_back({{"probabilities", probs}});
      }
      res.set_content(nlohmann::json{{"results", results}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::atomic<int> hits{0};
  std::atomic<int> fail_with_503{0};
  std::atomic<bool> reject_with_400{false};
  std::atomic<bool> short_results{false};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace disas::test
