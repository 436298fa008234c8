#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "disas/render.hpp"

namespace disas {

/// One token-classification query: a rendered snippet plus the instructions
/// whose validity is asked for, parallel to snippet.word_spans.
struct ClassifyRequest {
  Snippet snippet;
  std::vector<Address> queried;
  std::string tag;
};

/// Probability that each queried instruction is valid.
struct ClassifyResult {
  std::vector<double> probabilities;
};

/// Builds a request whose queried list follows the snippet's span order.
ClassifyRequest make_request(Snippet snippet, std::string tag);

/// Raised by classifiers that talk to something outside the process.
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

class Classifier {
 public:
  virtual ~Classifier() = default;

  /// One result per request, in request order.
  virtual std::vector<ClassifyResult> classify(std::span<const ClassifyRequest> batch) = 0;
};

/// Answers from a known set of true instruction starts: 1.0 inside, 0.0 outside.
class GroundTruthClassifier final : public Classifier {
 public:
  explicit GroundTruthClassifier(std::set<Address> truth) : truth_(std::move(truth)) {}
  std::vector<ClassifyResult> classify(std::span<const ClassifyRequest> batch) override;

 private:
  std::set<Address> truth_;
};

/// Ground truth with each hard verdict flipped with probability epsilon.
///
/// The flip decision is a deterministic hash of (seed, address), so it does
/// not depend on batching or query order, and the flipped sets are nested as
/// epsilon grows. With epsilon > 0 the outputs are softened to 0.99 / 0.01;
/// epsilon == 0 reproduces GroundTruthClassifier exactly.
class NoisyOracle final : public Classifier {
 public:
  static constexpr double kSoftHigh = 0.99;
  static constexpr double kSoftLow = 0.01;

  NoisyOracle(std::set<Address> truth, double epsilon, std::uint64_t seed);
  std::vector<ClassifyResult> classify(std::span<const ClassifyRequest> batch) override;

  bool flips(Address address) const;

 private:
  std::set<Address> truth_;
  double epsilon_;
  std::uint64_t seed_;
};

/// Classifier-free baseline: `(bad)` scores 0, privileged or rarely used
/// opcodes score 0.2, everything else 0.8.
class HeuristicClassifier final : public Classifier {
 public:
  static constexpr double kBad = 0.0;
  static constexpr double kRare = 0.2;
  static constexpr double kDefault = 0.8;

  std::vector<ClassifyResult> classify(std::span<const ClassifyRequest> batch) override;

  static double score(std::string_view instruction_text);
};

/// Memoized probabilities keyed by (snippet text, span index, address).
class ClassificationCache {
 public:
  bool lookup(const ClassifyRequest& request, ClassifyResult& out) const;
  void store(const ClassifyRequest& request, const ClassifyResult& result);
  std::size_t size() const { return entries_.size(); }

 private:
  using Key = std::tuple<std::size_t, std::size_t, Address>;
  std::map<Key, double> entries_;
};

struct QueueStats {
  std::size_t classify_calls = 0;
  std::size_t requests_sent = 0;
  std::size_t instructions_queried = 0;
  std::size_t cache_hits = 0;
  std::vector<std::size_t> batch_sizes;
};

/// A classification batch failed; no continuation of the batch ran.
class BatchError : public std::runtime_error {
 public:
  BatchError(const std::string& what, std::vector<std::string> tags, bool retryable)
      : std::runtime_error(what), tags_(std::move(tags)), retryable_(retryable) {}
  const std::vector<std::string>& tags() const { return tags_; }
  bool retryable() const { return retryable_; }

 private:
  std::vector<std::string> tags_;
  bool retryable_;
};

/// Buffers requests that share one kind of post-processing and classifies
/// them in batches of at most `max_batch`. Continuations run in enqueue order
/// after their batch returns. A request fully answered by the cache skips
/// the classifier and runs its continuation immediately.
class BatchQueue {
 public:
  using Continuation = std::function<void(const ClassifyResult&)>;

  BatchQueue(Classifier& classifier, std::string tag, std::size_t max_batch,
             ClassificationCache* cache = nullptr, QueueStats* stats = nullptr);

  const std::string& tag() const { return tag_; }
  std::size_t pending() const { return buffered_.size(); }

  void enqueue(ClassifyRequest request, Continuation continuation);
  void flush();

 private:
  Classifier& classifier_;
  std::string tag_;
  std::size_t max_batch_;
  ClassificationCache* cache_;
  QueueStats* stats_;
  std::vector<ClassifyRequest> buffered_;
  std::vector<Continuation> continuations_;
};

}  // namespace disas
