#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "subsight/evalstat.hpp"
#include "subsight/textio.hpp"

namespace fs = std::filesystem;
using namespace subsight;

namespace {

int run(const std::string& args) {
  std::string cmd = std::string(SUBSIGHT_CLI) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("subsight_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small enough that the whole chain runs in seconds.
const char* kTinyConfig = R"(rows = 10
cols = 10
epochs = 40
active_cells = 0
forest.n_trees = 10
tree.max_depth = 6
protocols = holdout:0.6
folds = 3
)";

}  // namespace

TEST_CASE("exit codes") {
  auto dir = scratch("codes");
  CHECK(run("--help") == 0);
  CHECK(run("frobnicate") == 1);
  CHECK(run("train --model banana --out " + dir.string()) == 1);
  {
    std::ofstream(dir / "bad.cfg") << "cell_size_m = -5\n";
  }
  CHECK(run("simulate --config " + (dir / "bad.cfg").string() + " --out " + dir.string()) == 1);
  // No stack in an empty directory.
  CHECK(run("invert --out " + dir.string()) == 2);
  {
    std::ofstream(dir / "stack.stk") << "SUBSIGHT-STACK v1\ngarbage\n";
  }
  CHECK(run("invert --out " + dir.string()) == 2);
}

TEST_CASE("full chain on a tiny scenario") {
  auto dir = scratch("chain");
  {
    std::ofstream(dir / "tiny.cfg") << kTinyConfig;
  }
  const std::string common = " --config " + (dir / "tiny.cfg").string() + " --out " + dir.string();
  REQUIRE(run("simulate" + common) == 0);
  REQUIRE(run("invert" + common) == 0);
  REQUIRE(run("fuse" + common) == 0);
  REQUIRE(run("train --model forest" + common) == 0);
  CHECK(fs::exists(dir / "forest.model"));
  REQUIRE(run("eval --model forest --protocol holdout:0.6 --protocol distance:10000" + common) == 0);
  std::ifstream report(dir / "report.csv");
  auto rows = evalstat::read_report_csv(report);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].protocol == "holdout:0.6");
  CHECK(rows[1].protocol == "distance:10000");
  CHECK(rows[1].model == "forest");
  CHECK(rows[0].n_train + rows[0].n_test == 100);
  REQUIRE(run("report" + common) == 0);
  CHECK(fs::exists(dir / "summary.txt"));
  bool svg = false;
  for (const auto& e : fs::directory_iterator(dir)) svg = svg || e.path().extension() == ".svg";
  CHECK(svg);
  for (const char* sub : {"simulate", "invert", "fuse", "train", "eval", "report"}) {
    auto manifest = slurp(dir / ("manifest_" + std::string(sub) + ".txt"));
    CHECK(manifest.find("subcommand: " + std::string(sub)) != std::string::npos);
    CHECK(manifest.find("# effective configuration") != std::string::npos);
  }

  REQUIRE(run("ablate --model tree --months all" + common) == 0);
  std::ifstream ab(dir / "ablation.csv");
  textio::line_reader lines(ab);
  std::string line;
  REQUIRE(lines.next(line));
  CHECK(line.find("bonferroni_threshold") != std::string::npos);
  int n = 0;
  while (lines.next(line)) {
    if (line.empty()) continue;
    ++n;
    auto f = textio::split(line, ',');
    REQUIRE(f.size() == 8);
    CHECK(textio::parse_real(f[6]) == 0.05 / 12.0);
  }
  CHECK(n == 12);
}
