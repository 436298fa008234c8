#include "disas/config.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

namespace disas {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw std::invalid_argument(fmt::format("{}: not a number: '{}'", key, value));
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double d = std::stod(value, &used);
    if (used == value.size()) return d;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument(fmt::format("{}: not a number: '{}'", key, value));
}

}  // namespace

void Config::set(const std::string& key, const std::string& raw) {
  std::string value = trim(raw);
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
    value = value.substr(1, value.size() - 2);
  }
  if (key == "window") engine.window = parse_number<std::size_t>(key, value);
  else if (key == "hi") engine.hi = parse_real(key, value);
  else if (key == "lo") engine.lo = parse_real(key, value);
  else if (key == "single_threshold") engine.single_threshold = parse_real(key, value);
  else if (key == "bfs_limit") engine.bfs_limit = parse_number<std::size_t>(key, value);
  else if (key == "batch_size") engine.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "max_fix_rounds") engine.max_fix_rounds = parse_number<std::size_t>(key, value);
  else if (key == "classifier") classifier = value;
  else if (key == "endpoint") endpoint = value;
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else throw std::invalid_argument(fmt::format("unknown setting '{}'", key));
}

void Config::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error(fmt::format("cannot read config {}", file.string()));
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(fmt::format("{}:{}: expected key = value", file.string(), lineno));
    }
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(fmt::format("{}:{}: {}", file.string(), lineno, e.what()));
    }
  }
}

void Config::validate() const {
  engine.validate();
  const bool known = classifier == "oracle" || classifier == "heuristic" ||
                     classifier == "remote" || classifier.starts_with("noisy:");
  if (!known) throw std::invalid_argument(fmt::format("unknown classifier '{}'", classifier));
}

std::string Config::dump() const {
  return fmt::format(
      "window = {}\nhi = {}\nlo = {}\nsingle_threshold = {}\nbfs_limit = {}\nbatch_size = {}\n"
      "max_fix_rounds = {}\nclassifier = {}\nendpoint = {}\nseed = {}\n",
      engine.window, engine.hi, engine.lo, engine.single_threshold, engine.bfs_limit,
      engine.batch_size, engine.max_fix_rounds, classifier, endpoint, seed);
}

}  // namespace disas
