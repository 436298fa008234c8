#include "disas/remote.hpp"

#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

namespace disas {

using nlohmann::json;

std::string encode_classify_request(std::span<const ClassifyRequest> batch) {
  json requests = json::array();
  for (const auto& request : batch) {
    json spans = json::array();
    for (const auto& span : request.snippet.word_spans) {
      spans.push_back({{"start", span.start}, {"end", span.end}});
    }
    requests.push_back({{"text", request.snippet.text}, {"spans", spans}});
  }
  return json{{"requests", requests}}.dump();
}

std::vector<ClassifyResult> decode_classify_response(std::string_view body,
                                                     std::span<const ClassifyRequest> batch) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("results") ||
      !doc["results"].is_array()) {
    throw TransportError("malformed classify response", false);
  }
  const json& results = doc["results"];
  if (results.size() != batch.size()) {
    throw TransportError(fmt::format("classify response has {} results for {} requests",
                                     results.size(), batch.size()),
                         false);
  }
  std::vector<ClassifyResult> out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const json& probs = results[i].value("probabilities", json());
    if (!probs.is_array() || probs.size() != batch[i].snippet.word_spans.size()) {
      throw TransportError(fmt::format("result {} is not parallel to its spans", i), false);
    }
    ClassifyResult result;
    for (const auto& p : probs) {
      if (!p.is_number()) throw TransportError("non-numeric probability", false);
      const double v = p.get<double>();
      if (!(v >= 0.0 && v <= 1.0)) throw TransportError("probability outside [0, 1]", false);
      result.probabilities.push_back(v);
    }
    out.push_back(std::move(result));
  }
  return out;
}

RemoteClassifier::RemoteClassifier(std::string endpoint, RemoteOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
  // Split "http://host:port/prefix" into the client base and a path prefix.
  const auto scheme = endpoint_.find("://");
  const auto path_at = endpoint_.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  host_ = endpoint_.substr(0, path_at);
  if (path_at != std::string::npos) path_prefix_ = endpoint_.substr(path_at);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

RemoteClassifier::~RemoteClassifier() = default;

std::string RemoteClassifier::endpoint_from_env() {
  const char* url = std::getenv(kClassifierUrlEnv);
  if (url == nullptr || *url == '\0') {
    throw std::runtime_error(fmt::format("{} is not set", kClassifierUrlEnv));
  }
  return url;
}

std::vector<ClassifyResult> RemoteClassifier::classify(std::span<const ClassifyRequest> batch) {
  if (batch.empty()) return {};
  const std::string body = encode_classify_request(batch);
  const std::string path = path_prefix_ + "/v1/classify";

  httplib::Client client(host_);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());

  std::string last_error;
  auto delay = options_.backoff;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = fmt::format("{}: {}", endpoint_, httplib::to_string(res.error()));
      continue;
    }
    if (res->status == 200) return decode_classify_response(res->body, batch);
    if (res->status >= 400 && res->status < 500) {
      throw TransportError(fmt::format("{} rejected request: HTTP {}", endpoint_, res->status),
                           false);
    }
    last_error = fmt::format("{} answered HTTP {}", endpoint_, res->status);
  }
  throw TransportError(
      fmt::format("classifier unavailable after {} attempts: {}", options_.retries + 1, last_error),
      true);
}

}  // namespace disas
