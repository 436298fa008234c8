#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "disas/config.hpp"

using namespace disas;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << content;
  return path;
}

}  // namespace

TEST_CASE("defaults") {
  const Config c;
  CHECK(c.engine.window == 16);
  CHECK(c.engine.hi == 0.95);
  CHECK(c.engine.lo == 0.05);
  CHECK(c.engine.single_threshold == 0.5);
  CHECK(c.engine.bfs_limit == 32);
  CHECK(c.engine.batch_size == 32);
  CHECK(c.classifier == "oracle");
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("set and validate") {
  Config c;
  c.set("window", "8");
  c.set("hi", " 0.9 ");
  c.set("classifier", "\"noisy:0.1\"");
  CHECK(c.engine.window == 8);
  CHECK(c.engine.hi == 0.9);
  CHECK(c.classifier == "noisy:0.1");
  CHECK_NOTHROW(c.validate());
  CHECK_THROWS_AS(c.set("windw", "8"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("window", "8x"), std::invalid_argument);
  CHECK_THROWS_AS(c.set("hi", "high"), std::invalid_argument);

  Config bad;
  bad.set("lo", "0.99");
  CHECK_THROWS(bad.validate());
  bad = {};
  bad.set("batch_size", "0");
  CHECK_THROWS(bad.validate());
  bad = {};
  bad.set("classifier", "magic");
  CHECK_THROWS(bad.validate());
}

TEST_CASE("file loading and dump round trip") {
  Config c;
  c.set("bfs_limit", "4");
  c.set("seed", "99");
  c.set("endpoint", "http://127.0.0.1:9");
  const auto path = write_temp("disas_cfg_rt.conf", "# saved\n" + c.dump());
  Config back;
  back.load(path);
  CHECK(back.dump() == c.dump());

  const auto broken = write_temp("disas_cfg_bad.conf", "window = 4\n\nnonsense\n");
  try {
    Config x;
    x.load(broken);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  const auto unknown = write_temp("disas_cfg_unk.conf", "wat = 1  # trailing\n");
  CHECK_THROWS_AS(Config{}.load(unknown), std::runtime_error);
  CHECK_THROWS_AS(Config{}.load("/nonexistent/disas.conf"), std::runtime_error);
}
