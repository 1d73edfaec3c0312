#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "subsight/config.hpp"

using namespace subsight;

TEST_CASE("empty file gives the defaults") {
  auto cfg = parse_config("");
  auto defaults = run_config{};
  CHECK(normalized_config(cfg) == normalized_config(defaults));
  CHECK(parse_config("# only a comment\n\n   \n").seed == 1);
}

TEST_CASE("invalid value names the key and the constraint") {
  try {
    parse_config("cell_size_m = -5\n");
    FAIL("expected a config error");
  } catch (const config_error& e) {
    REQUIRE(e.problems().size() == 1);
    CHECK(e.problems()[0].find("cell_size_m") != std::string::npos);
    CHECK(e.problems()[0].find("> 0") != std::string::npos);
  }
}

TEST_CASE("all problems are reported together") {
  try {
    parse_config("cell_size_m = -5\nno_such_key = 3\nforest.n_trees = many\n");
    FAIL("expected a config error");
  } catch (const config_error& e) {
    CHECK(e.problems().size() == 3);
    std::string all = e.what();
    CHECK(all.find("cell_size_m") != std::string::npos);
    CHECK(all.find("no_such_key") != std::string::npos);
    CHECK(all.find("forest.n_trees") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("rows 3\n"), config_error);
}

TEST_CASE("normalized config parses back to itself") {
  for (const char* name : {"cv-small.cfg", "cv-full.cfg", "october-planted.cfg"}) {
    auto cfg = load_config(std::filesystem::path(SUBSIGHT_CONFIG_DIR) / name);
    auto text = normalized_config(cfg);
    CHECK(normalized_config(parse_config(text)) == text);
  }
  auto text = normalized_config(run_config{});
  for (const auto& key : config_keys()) CHECK(text.find(key + " = ") != std::string::npos);
}

TEST_CASE("shipped configs describe the intended scenarios") {
  auto small = load_config(std::filesystem::path(SUBSIGHT_CONFIG_DIR) / "cv-small.cfg");
  CHECK(small.scenario.grid.space.rows == 40);
  CHECK(small.scenario.grid.space.cols == 40);
  CHECK(small.scenario.grid.n_epochs() == 132);
  auto october = load_config(std::filesystem::path(SUBSIGHT_CONFIG_DIR) / "october-planted.cfg");
  CHECK(october.folds == 10);
  CHECK(october.comparisons == 12);
  auto full = load_config(std::filesystem::path(SUBSIGHT_CONFIG_DIR) / "cv-full.cfg");
  CHECK(full.scenario.active_cells == 8818);
}

TEST_CASE("large seeds survive normalization") {
  auto cfg = parse_config("seed = 18446744073709551615\n");
  CHECK(cfg.seed == 18446744073709551615ULL);
  CHECK(parse_config(normalized_config(cfg)).seed == cfg.seed);
  CHECK_THROWS_AS(parse_config("seed = -1\n"), config_error);
}
