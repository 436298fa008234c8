#include "disas/classify.hpp"

#include <algorithm>
#include <array>
#include <string_view>

#include <fmt/format.h>

namespace disas {

ClassifyRequest make_request(Snippet snippet, std::string tag) {
  ClassifyRequest request;
  for (const auto& span : snippet.word_spans) request.queried.push_back(span.address);
  request.snippet = std::move(snippet);
  request.tag = std::move(tag);
  return request;
}

std::vector<ClassifyResult> GroundTruthClassifier::classify(
    std::span<const ClassifyRequest> batch) {
  std::vector<ClassifyResult> out;
  out.reserve(batch.size());
  for (const auto& request : batch) {
    ClassifyResult result;
    for (Address a : request.queried) result.probabilities.push_back(truth_.contains(a) ? 1.0 : 0.0);
    out.push_back(std::move(result));
  }
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

NoisyOracle::NoisyOracle(std::set<Address> truth, double epsilon, std::uint64_t seed)
    : truth_(std::move(truth)), epsilon_(epsilon), seed_(seed) {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon must be in [0, 1]");
}

bool NoisyOracle::flips(Address address) const {
  if (epsilon_ <= 0.0) return false;
  const std::uint64_t h = splitmix64(seed_ ^ splitmix64(address));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return u < epsilon_;
}

std::vector<ClassifyResult> NoisyOracle::classify(std::span<const ClassifyRequest> batch) {
  const double high = epsilon_ > 0.0 ? kSoftHigh : 1.0;
  const double low = epsilon_ > 0.0 ? kSoftLow : 0.0;
  std::vector<ClassifyResult> out;
  out.reserve(batch.size());
  for (const auto& request : batch) {
    ClassifyResult result;
    for (Address a : request.queried) {
      const bool valid = truth_.contains(a) != flips(a);
      result.probabilities.push_back(valid ? high : low);
    }
    out.push_back(std::move(result));
  }
  return out;
}

double HeuristicClassifier::score(std::string_view text) {
  static constexpr std::array<std::string_view, 36> kRareMnemonics = {
      "in",     "out",    "insb",   "insd",    "insw",   "outsb", "outsd", "outsw", "hlt",
      "cli",    "sti",    "clts",   "iretd",   "iretq",  "lgdt",  "lidt",  "lldt",  "ltr",
      "invd",   "wbinvd", "wrmsr",  "rdmsr",   "int1",   "into",  "sysexit", "sysret",
      "lock",   "enter",  "fwait",  "sahf",    "lahf",   "cmc",   "std",   "xlatb", "arpl",
      "retf"};
  const std::string_view mnemonic = text.substr(0, text.find(' '));
  if (mnemonic == "(bad)") return kBad;
  if (std::ranges::find(kRareMnemonics, mnemonic) != kRareMnemonics.end()) return kRare;
  return kDefault;
}

std::vector<ClassifyResult> HeuristicClassifier::classify(
    std::span<const ClassifyRequest> batch) {
  std::vector<ClassifyResult> out;
  out.reserve(batch.size());
  for (const auto& request : batch) {
    ClassifyResult result;
    const auto& text = request.snippet.text;
    for (const auto& span : request.snippet.word_spans) {
      result.probabilities.push_back(
          score(std::string_view(text).substr(span.start, span.end - span.start)));
    }
    out.push_back(std::move(result));
  }
  return out;
}

bool ClassificationCache::lookup(const ClassifyRequest& request, ClassifyResult& out) const {
  const std::size_t text_hash = std::hash<std::string>{}(request.snippet.text);
  ClassifyResult found;
  for (std::size_t i = 0; i < request.queried.size(); ++i) {
    auto it = entries_.find({text_hash, i, request.queried[i]});
    if (it == entries_.end()) return false;
    found.probabilities.push_back(it->second);
  }
  out = std::move(found);
  return true;
}

void ClassificationCache::store(const ClassifyRequest& request, const ClassifyResult& result) {
  const std::size_t text_hash = std::hash<std::string>{}(request.snippet.text);
  for (std::size_t i = 0; i < request.queried.size(); ++i) {
    entries_[{text_hash, i, request.queried[i]}] = result.probabilities.at(i);
  }
}

BatchQueue::BatchQueue(Classifier& classifier, std::string tag, std::size_t max_batch,
                       ClassificationCache* cache, QueueStats* stats)
    : classifier_(classifier),
      tag_(std::move(tag)),
      max_batch_(max_batch),
      cache_(cache),
      stats_(stats) {
  if (max_batch_ == 0) throw std::invalid_argument("batch size must be at least 1");
}

void BatchQueue::enqueue(ClassifyRequest request, Continuation continuation) {
  if (request.queried.size() != request.snippet.word_spans.size()) {
    throw std::invalid_argument("request: queried list does not match word spans");
  }
  if (request.tag.empty()) request.tag = tag_;
  if (cache_ != nullptr) {
    ClassifyResult cached;
    if (cache_->lookup(request, cached)) {
      if (stats_ != nullptr) ++stats_->cache_hits;
      continuation(cached);
      return;
    }
  }
  buffered_.push_back(std::move(request));
  continuations_.push_back(std::move(continuation));
  if (buffered_.size() >= max_batch_) flush();
}

void BatchQueue::flush() {
  while (!buffered_.empty()) {
    const std::size_t n = std::min(max_batch_, buffered_.size());
    std::vector<ClassifyRequest> batch(std::make_move_iterator(buffered_.begin()),
                                       std::make_move_iterator(buffered_.begin() + n));
    std::vector<Continuation> todo(std::make_move_iterator(continuations_.begin()),
                                   std::make_move_iterator(continuations_.begin() + n));
    buffered_.erase(buffered_.begin(), buffered_.begin() + n);
    continuations_.erase(continuations_.begin(), continuations_.begin() + n);

    std::vector<ClassifyResult> results;
    try {
      results = classifier_.classify(batch);
      if (results.size() != batch.size()) {
        throw TransportError(fmt::format("classifier returned {} results for {} requests",
                                         results.size(), batch.size()),
                             false);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto& probs = results[i].probabilities;
        if (probs.size() != batch[i].queried.size()) {
          throw TransportError("classifier result size does not match queried instructions",
                               false);
        }
        for (double p : probs) {
          if (!(p >= 0.0 && p <= 1.0)) throw TransportError("probability outside [0, 1]", false);
        }
      }
    } catch (const TransportError& e) {
      std::vector<std::string> tags;
      for (const auto& r : batch) tags.push_back(r.tag);
      throw BatchError(fmt::format("batch of {} [{}] failed: {}", n, tag_, e.what()),
                       std::move(tags), e.retryable());
    }

    if (stats_ != nullptr) {
      ++stats_->classify_calls;
      stats_->requests_sent += n;
      stats_->batch_sizes.push_back(n);
      for (const auto& r : batch) stats_->instructions_queried += r.queried.size();
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (cache_ != nullptr) cache_->store(batch[i], results[i]);
      todo[i](results[i]);
    }
  }
}

}  // namespace disas
