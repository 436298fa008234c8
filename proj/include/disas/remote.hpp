#pragma once

#include <chrono>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "disas/classify.hpp"

namespace disas {

/// Environment variable naming the classifier endpoint.
inline constexpr const char* kClassifierUrlEnv = "DISAS_CLASSIFIER_URL";

/// Request body for POST /v1/classify:
/// {"requests":[{"text": ..., "spans":[{"start":..,"end":..}]}]}
std::string encode_classify_request(std::span<const ClassifyRequest> batch);

/// Parses a /v1/classify response and checks it against the batch shape.
/// Throws TransportError (non-retryable) on any mismatch.
std::vector<ClassifyResult> decode_classify_response(std::string_view body,
                                                     std::span<const ClassifyRequest> batch);

struct RemoteOptions {
  std::chrono::milliseconds timeout{30'000};
  int retries = 2;
  std::chrono::milliseconds backoff{250};
};

/// HTTP client for a model server speaking the /v1/classify protocol.
/// 4xx responses fail immediately; 5xx and connection failures are retried
/// with exponential backoff, then surface as a retryable TransportError.
/// Safe for concurrent use.
class RemoteClassifier final : public Classifier {
 public:
  explicit RemoteClassifier(std::string endpoint, RemoteOptions options = {});
  ~RemoteClassifier() override;

  /// Endpoint from DISAS_CLASSIFIER_URL; throws std::runtime_error if unset.
  static std::string endpoint_from_env();

  const std::string& endpoint() const { return endpoint_; }
  std::vector<ClassifyResult> classify(std::span<const ClassifyRequest> batch) override;

 private:
  std::string endpoint_;
  RemoteOptions options_;
  std::string host_;
  std::string path_prefix_;
};

}  // namespace disas
