#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "bgmm/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bgmm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = bgmm::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

class Workdir {
 public:
  explicit Workdir(const std::string& name) : path_(fs::temp_directory_path() / ("bgmm_cli_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Workdir() { fs::remove_all(path_); }
  std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }
  std::string write(const std::string& leaf, const std::string& text) const {
    std::ofstream(path_ / leaf) << text;
    return (path_ / leaf).string();
  }

 private:
  fs::path path_;
};

const char* kTiny =
    R"({"family":"longitudinal-gaussian","n":4,"s":2,"p":1,"theta0":[0.5],"rho":0.2,"seed":5,
        "sampler":{"n_iter":200,"burn_in":50,"thin":2,"sigma_add":0.3}})";

const char* kSmall =
    R"({"family":"longitudinal-gaussian","n":120,"s":3,"p":3,"theta0":[1.0,0.0,-1.0],"rho":0.3,"seed":11,
        "replications":2,"sampler":{"n_iter":2000,"burn_in":500,"thin":5,"sigma_add":0.3}})";

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"generate", "--out", "x.csv"}).code == 2);
  CHECK(cli({"generate", "--config", "/nonexistent/config.json", "--out", "x.csv"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("generate writes n*s rows and is seed-deterministic") {
  Workdir dir("generate");
  const auto config = dir.write("tiny.json", kTiny);
  REQUIRE(cli({"generate", "--config", config, "--out", dir / "a.csv"}).code == 0);
  REQUIRE(cli({"generate", "--config", config, "--out", dir / "b.csv"}).code == 0);
  const auto rows = lines(slurp(dir / "a.csv"));
  REQUIRE(rows.size() == 9);
  CHECK(rows[0] == "subject,position,Y,X1");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  const json meta = json::parse(slurp(dir / "a.csv.meta.json"));
  CHECK(meta["n"] == 4);
  CHECK(meta["s"] == 2);
  CHECK(meta["seed"] == 5);

  REQUIRE(cli({"generate", "--config", config, "--seed", "6", "--out", dir / "c.csv"}).code == 0);
  const auto other = lines(slurp(dir / "c.csv"));
  CHECK(other.size() == 9);
  CHECK(other[0] == rows[0]);
  CHECK(slurp(dir / "c.csv") != slurp(dir / "a.csv"));
}

TEST_CASE("invalid configurations exit with code 2") {
  Workdir dir("config");
  CHECK(cli({"generate", "--config", dir.write("bad.json", "{\"family\": "), "--out", dir / "x.csv"}).code == 2);
  CHECK(cli({"generate", "--config", dir.write("unk.json", R"({"family":"quantile","colour":1})"), "--out",
             dir / "x.csv"})
            .code == 2);
  const auto config = dir.write("tiny.json", kTiny);
  CHECK(cli({"generate", "--config", config, "--thin", "0", "--out", dir / "x.csv"}).code == 2);
}

TEST_CASE("fit reads generated data and writes a summary") {
  Workdir dir("fit");
  const auto config = dir.write("small.json", kSmall);
  REQUIRE(cli({"generate", "--config", config, "--out", dir / "data.csv"}).code == 0);
  const Run r = cli({"fit", "--config", config, "--data", dir / "data.csv", "--out", dir / "fit"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("MAP model") != std::string::npos);
  const json summary = json::parse(slurp(dir / "fit/summary.json"));
  CHECK(summary.contains("model_probs"));
  CHECK(summary["diagnostics"]["iterations"] == 2000);
  CHECK(lines(slurp(dir / "fit/chain.csv")).size() == 301);

  SUBCASE("thinning beyond the retained draws") {
    CHECK(cli({"fit", "--config", config, "--data", dir / "data.csv", "--thin", "5000", "--out", dir / "fit2"}).code ==
          2);
  }
  SUBCASE("missing response column") {
    auto rows = lines(slurp(dir / "data.csv"));
    std::string text;
    for (const auto& line : rows) {
      const auto a = line.find(',', line.find(',') + 1);
      const auto b = line.find(',', a + 1);
      text += line.substr(0, a) + line.substr(b) + "\n";
    }
    const auto broken = dir.write("broken.csv", text);
    const Run bad = cli({"fit", "--config", config, "--data", broken, "--out", dir / "fit3"});
    CHECK(bad.code == 2);
    CHECK_FALSE(bad.err.empty());
  }
  SUBCASE("missing data file") {
    CHECK(cli({"fit", "--config", config, "--data", dir / "none.csv", "--out", dir / "fit4"}).code == 2);
  }
}

TEST_CASE("study writes one report row per replication") {
  Workdir dir("study");
  const auto config = dir.write("small.json", kSmall);
  REQUIRE(cli({"study", "--config", config, "--threads", "2", "--out", dir / "a"}).code == 0);
  const auto rows = lines(slurp(dir / "a/report.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].rfind("replication,seed,status,", 0) == 0);
  const json report = json::parse(slurp(dir / "a/report.json"));
  CHECK(report["replications"] == 2);
  CHECK(report["failures"] == 0);

  REQUIRE(cli({"study", "--config", config, "--threads", "1", "--out", dir / "b"}).code == 0);
  CHECK(slurp(dir / "a/report.csv") == slurp(dir / "b/report.csv"));

  REQUIRE(cli({"study", "--config", config, "--seed", "99", "--out", dir / "c"}).code == 0);
  const auto reseeded = lines(slurp(dir / "c/report.csv"));
  REQUIRE(reseeded.size() == 3);
  CHECK(reseeded[0] == rows[0]);
  CHECK(reseeded[1] != rows[1]);
}

TEST_CASE("oracle-check compares chain and quadrature") {
  Workdir dir("oracle");
  const auto config = dir.write(
      "o.json",
      R"({"family":"longitudinal-gaussian","n":150,"s":1,"p":2,"theta0":[0.6,0.0],"working_correlation":"independence",
          "seed":3,"sampler":{"n_iter":20000,"burn_in":2000,"thin":1,"sigma_add":0.3}})");
  const Run r = cli({"oracle-check", "--config", config, "--out", dir / "o.json.out"});
  REQUIRE(r.code == 0);
  const json j = json::parse(slurp(dir / "o.json.out"));
  CHECK(j["models"].size() == 3);
  CHECK(j["max_gap_chain_quadrature"].get<double>() < 0.05);

  const auto big = dir.write(
      "big.json", R"({"family":"longitudinal-gaussian","n":50,"s":1,"p":4,"theta0":[1,0,0,0],"seed":3})");
  const Run refused = cli({"oracle-check", "--config", big, "--out", dir / "big.out"});
  CHECK(refused.code == 2);
  CHECK(refused.err.find("at most") != std::string::npos);
}
