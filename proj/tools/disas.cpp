// disas: obfuscation-resilient x86-64 disassembler front end.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "disas/config.hpp"
#include "disas/corpus.hpp"
#include "disas/eval.hpp"
#include "disas/remote.hpp"

namespace {

using namespace disas;

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path));
}

// Input bytes plus whatever metadata is available.
Sample load_input(const std::string& input, const std::string& meta, std::optional<Address> base) {
  if (!meta.empty()) {
    Sample sample = read_sample(input, meta);
    if (base) sample.region.base = *base;
    if (sample.region.entry_points.empty()) sample.region.entry_points = {sample.region.base};
    return sample;
  }
  Sample sample;
  std::ifstream in(input, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", input));
  sample.region.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  sample.region.base = base.value_or(0x401000);
  sample.region.entry_points = {sample.region.base};
  return sample;
}

std::unique_ptr<Classifier> make_classifier(const Config& config, const Sample& sample) {
  const std::string& kind = config.classifier;
  auto need_truth = [&] {
    if (sample.truth.instruction_starts.empty()) {
      throw std::runtime_error(
          fmt::format("classifier '{}' needs instruction_starts in the metadata", kind));
    }
  };
  if (kind == "oracle") {
    need_truth();
    return std::make_unique<GroundTruthClassifier>(sample.truth.instruction_starts);
  }
  if (kind.starts_with("noisy:")) {
    need_truth();
    double epsilon = 0.0;
    try {
      epsilon = std::stod(kind.substr(6));
    } catch (const std::exception&) {
      throw std::invalid_argument(fmt::format("bad noise level in '{}'", kind));
    }
    return std::make_unique<NoisyOracle>(sample.truth.instruction_starts, epsilon, config.seed);
  }
  if (kind == "heuristic") return std::make_unique<HeuristicClassifier>();
  if (kind == "remote") {
    const std::string endpoint =
        config.endpoint.empty() ? RemoteClassifier::endpoint_from_env() : config.endpoint;
    return std::make_unique<RemoteClassifier>(endpoint);
  }
  throw std::invalid_argument(fmt::format("unknown classifier '{}'", kind));
}

std::vector<Address> read_address_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", path));
  std::vector<Address> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    std::istringstream words(line);
    std::string word;
    if (!(words >> word) || word.starts_with('#')) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(word, &used, 16));
      if (used != word.size()) throw std::invalid_argument(word);
    } catch (const std::exception&) {
      throw std::runtime_error(fmt::format("{}:{}: not a hex address: {}", path, lineno, word));
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Obfuscation-resilient x86-64 disassembler"};
  app.require_subcommand(0, 1);

  Config config;
  std::string config_file;
  std::vector<std::string> overrides;
  bool print_config = false;
  app.add_option("--config", config_file, "key = value settings file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override one setting, key=value (repeatable)");
  app.add_flag("--print-config", print_config, "print the effective configuration and exit");

  // disasm
  auto* disasm = app.add_subcommand("disasm", "disassemble a code region");
  std::string input, meta, out_json, out_text, dump_graph, classifier, endpoint;
  std::optional<Address> base;
  std::optional<std::size_t> batch_size;
  disasm->add_option("--input", input, "raw code bytes")->required()->check(CLI::ExistingFile);
  disasm->add_option("--meta", meta, "sample metadata JSON")->check(CLI::ExistingFile);
  disasm->add_option("--base", base, "load address when no metadata is given");
  disasm->add_option("--classifier", classifier, "oracle | noisy:EPS | heuristic | remote");
  disasm->add_option("--endpoint", endpoint, "remote classifier URL");
  disasm->add_option("--batch-size", batch_size, "classifier batch size");
  disasm->add_option("--out", out_json, "write the JSON listing here");
  disasm->add_option("--text", out_text, "write the text listing here (default: stdout)");
  disasm->add_option("--dump-graph", dump_graph, "write the initial graph as JSON");

  // gen
  auto* gen = app.add_subcommand("gen", "generate synthetic obfuscated samples");
  GenParams params;
  std::uint64_t gen_seed = 1;
  std::size_t count = 1;
  std::string out_dir = ".", prefix = "sample";
  gen->add_option("--seed", gen_seed, "first seed");
  gen->add_option("--blocks", params.blocks, "basic blocks per sample");
  gen->add_option("--junk-max", params.junk_max, "longest junk run (1..15)");
  gen->add_option("--count", count, "number of samples");
  gen->add_option("--out-dir", out_dir, "output directory");
  gen->add_option("--prefix", prefix, "file name prefix");

  // score
  auto* score_cmd = app.add_subcommand("score", "score predicted addresses against ground truth");
  std::string score_input, score_meta, predictions;
  bool csv = false;
  score_cmd->add_option("--input", score_input, "raw code bytes")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--meta", score_meta, "sample metadata JSON")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--predictions", predictions, "one hex address per line")
      ->required()
      ->check(CLI::ExistingFile);
  score_cmd->add_flag("--csv", csv, "CSV output");

  // emit-dataset
  auto* emit = app.add_subcommand("emit-dataset", "write training data for the classifier");
  std::string emit_input, emit_meta, format = "mntp", emit_out;
  emit->add_option("--input", emit_input, "raw code bytes")->required()->check(CLI::ExistingFile);
  emit->add_option("--meta", emit_meta, "sample metadata JSON")->required()->check(CLI::ExistingFile);
  emit->add_option("--format", format, "mntp | supervised")
      ->check(CLI::IsMember({"mntp", "supervised"}));
  emit->add_option("--out", emit_out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (!config_file.empty()) config.load(config_file);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument(fmt::format("--set {}: expected key=value", kv));
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!classifier.empty()) config.classifier = classifier;
    if (!endpoint.empty()) config.endpoint = endpoint;
    if (batch_size) config.engine.batch_size = *batch_size;
    config.validate();
    params.validate();
  } catch (const std::exception& e) {
    std::cerr << "disas: " << e.what() << '\n';
    return kExitUsage;
  }

  if (print_config) {
    std::cout << config.dump();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (disasm->parsed()) {
      const Sample sample = load_input(input, meta, base);
      auto cls = make_classifier(config, sample);
      CodeImage image(sample.region.base, sample.region.bytes);
      DisasmGraph graph = initial_disassemble(image, sample.region.entry_points);
      if (!dump_graph.empty()) write_file(dump_graph, graph_to_json(graph));
      Engine engine(image, std::move(graph), *cls, config.engine);
      const FinalListing listing = engine.run();
      if (!out_json.empty()) write_file(out_json, listing.to_json() + "\n");
      if (!out_text.empty()) {
        write_file(out_text, listing.text());
      } else if (out_json.empty()) {
        std::cout << listing.text();
      }
      const auto& stats = engine.queue_stats();
      std::cerr << fmt::format("{} valid instructions, {} data bytes, {} classifier calls\n",
                               listing.instructions.size(), listing.data_bytes.size(),
                               stats.classify_calls);
    } else if (gen->parsed()) {
      for (std::size_t i = 0; i < count; ++i) {
        const Sample sample = generate_sample(gen_seed + i, params);
        validate_sample(sample);
        write_sample(out_dir, fmt::format("{}{:03}", prefix, i), sample);
      }
    } else if (score_cmd->parsed()) {
      const Sample sample = read_sample(score_input, score_meta);
      const auto predicted = predictions_from(read_address_list(predictions), sample.region);
      const ScoreTable table = score_table(predicted, sample.truth, sample.region);
      std::cout << (csv ? format_table_csv(table) : format_table_text(table));
    } else if (emit->parsed()) {
      const Sample sample = read_sample(emit_input, emit_meta);
      std::string text;
      if (format == "mntp") {
        text = emit_mntp_text(sample.region, sample.truth, config.seed);
      } else {
        for (const auto& entry : emit_supervised_entries(sample.region, sample.truth, config.engine).entries) {
          text += entry_to_json(entry) + "\n";
        }
      }
      if (emit_out.empty()) std::cout << text;
      else write_file(emit_out, text);
    }
  } catch (const std::exception& e) {
    std::cerr << "disas: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
