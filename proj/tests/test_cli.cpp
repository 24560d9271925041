#include "catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ordfa/cli.hpp"
#include "ordfa/config.hpp"

using namespace ordfa;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ordfa_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int run(const std::vector<std::string>& args, std::string* out = nullptr, std::string* err = nullptr) {
  std::ostringstream o, e;
  const int rc = cli_main(args, o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return rc;
}

}  // namespace

TEST_CASE("prior-solve prints the solved prior", "[cli]") {
  const auto dir = scratch("solve");
  put(dir / "t.ini", "[targets]\nmean = -2.00 -0.25\nvariance = 0.20 0.25\n");
  std::string out;
  REQUIRE(run({"prior-solve", "--targets", (dir / "t.ini").string()}, &out) == 0);
  CHECK_THAT(out, ContainsSubstring("tau*_2 ~ Normal(0.55, 0.02)"));
}

TEST_CASE("usage errors exit with 1", "[cli]") {
  std::string err;
  CHECK(run({"fit", "--bogus"}, nullptr, &err) == 1);
  CHECK_FALSE(err.empty());
  CHECK(run({"frobnicate"}) == 1);
  CHECK(run({"fit", "--config", "/nonexistent/x.ini"}, nullptr, &err) == 1);
  CHECK_THAT(err, ContainsSubstring("x.ini"));
}

TEST_CASE("simulate is reproducible", "[cli]") {
  const auto dir = scratch("sim");
  put(dir / "c.ini", "[condition]\nshape = sparse\nsparse_items = 2\nn = 60\nseed = 3\n");
  REQUIRE(run({"simulate", "--condition", (dir / "c.ini").string(), "--out", (dir / "a").string()}) == 0);
  REQUIRE(run({"simulate", "--condition", (dir / "c.ini").string(), "--out", (dir / "b").string()}) == 0);
  for (const char* f : {"data.csv", "truth.json", "fit.ini"})
    CHECK(read_text_file((dir / "a" / f).string()) == read_text_file((dir / "b" / f).string()));
  const auto truth = read_text_file((dir / "a" / "truth.json").string());
  CHECK_THAT(truth, ContainsSubstring("\"sparse\": true"));
  CHECK(read_text_file((dir / "a" / "data.csv").string()).rfind("# ordfa ", 0) == 0);
}

TEST_CASE("fit keeps declared categories that never occur", "[cli]") {
  const auto dir = scratch("fit");
  put(dir / "data.csv", "a,b,c\n1,1,2\n2,1,1\n3,2,2\n1,2,3\n2,3,3\n3,3,1\n1,1,1\n2,2,2\n3,3,3\n2,1,2\n");
  put(dir / "run.ini", R"([run]
seed = 2
data = data.csv
output = out

[model]
factors = 1
items = a b c
factor_of = 1 1 1
categories = 4
reference = 1

[priors]
family = dirichlet

[sampler]
chains = 2
iterations = 200
warmup = 100
)");
  std::string out, err;
  REQUIRE(run({"fit", "--config", (dir / "run.ini").string()}, &out, &err) == 0);
  const auto summary = read_text_file((dir / "out" / "summary.csv").string());
  for (const char* name : {"tau.1.3", "tau.2.3", "tau.3.3"}) CHECK_THAT(summary, ContainsSubstring(name));
  CHECK(summary.find("tau.1.4") == std::string::npos);
  CHECK(read_text_file((dir / "out" / "draws.csv").string()).rfind("# ordfa ", 0) == 0);
  CHECK(read_text_file((dir / "out" / "config.ini").string()).rfind("; ordfa ", 0) == 0);
  CHECK_THAT(out, ContainsSubstring("category counts"));
}

TEST_CASE("prior-predict writes a draw table", "[cli]") {
  const auto dir = scratch("predict");
  put(dir / "p.ini", "[prior]\nfamily = dirichlet\nalpha = 1 1 1\n");
  REQUIRE(run({"prior-predict", "--prior", (dir / "p.ini").string(), "--draws", "50", "--seed", "4", "--out",
               (dir / "pp.csv").string()}) == 0);
  std::istringstream in(read_text_file((dir / "pp.csv").string()));
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# ordfa ", 0) == 0);
  std::getline(in, line);
  CHECK(line == "draw,tau.1,tau.2,p.1,p.2,p.3");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 50);
}
