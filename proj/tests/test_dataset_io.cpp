#include "catch_amalgamated.hpp"

#include <sstream>

#include "ordfa/dataset_io.hpp"
#include "ordfa/errors.hpp"

using namespace ordfa;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("columns are matched by name and counts keep empty categories", "[dataset_io]") {
  std::istringstream in("# comment\nid,b,a\n\n1,2,1\n2,1,1\n3,2,3\n");
  const auto f = parse_dataset(in, {"a", "b"}, {4, 2});
  REQUIRE(f.data.n_rows() == 3);
  CHECK(f.data(0, 0) == 1);
  CHECK(f.data(2, 0) == 3);
  CHECK(f.data(0, 1) == 2);
  CHECK(f.data.category_counts()[0] == std::vector<int>{2, 0, 1, 0});
  CHECK(f.warnings.empty());
  const std::string table = format_category_counts({"a", "b"}, f.data);
  CHECK_THAT(table, ContainsSubstring("-"));
}

TEST_CASE("invalid codes cite row and column", "[dataset_io]") {
  std::istringstream in("a,b\n1,2\n0,1\n");
  CHECK_THROWS_WITH(parse_dataset(in, {"a", "b"}, {3, 3}, {}, "d.csv"),
                    ContainsSubstring("row 2 (line 3), column 1 'a'") && ContainsSubstring("value 0"));
  std::istringstream over("a,b\n1,5\n");
  CHECK_THROWS_WITH(parse_dataset(over, {"a", "b"}, {3, 3}), ContainsSubstring("1..3"));
  std::istringstream text("a,b\n1,x\n");
  CHECK_THROWS_WITH(parse_dataset(text, {"a", "b"}, {3, 3}), ContainsSubstring("not an integer"));
  std::istringstream blank("a,b\n1,\n");
  CHECK_THROWS_WITH(parse_dataset(blank, {"a", "b"}, {3, 3}), ContainsSubstring("missing"));
  std::istringstream ragged("a,b\n1,2,3\n");
  CHECK_THROWS_AS(parse_dataset(ragged, {"a", "b"}, {3, 3}), DataError);
  std::istringstream absent("a,c\n1,2\n");
  CHECK_THROWS_WITH(parse_dataset(absent, {"a", "b"}, {3, 3}), ContainsSubstring("'b'"));
}

TEST_CASE("constant column warns", "[dataset_io]") {
  std::istringstream in("a,b\n2,1\n2,3\n");
  const auto f = parse_dataset(in, {"a", "b"}, {3, 3});
  REQUIRE(f.warnings.size() == 1);
  CHECK_THAT(f.warnings[0], ContainsSubstring("'a'"));
}

TEST_CASE("group column", "[dataset_io]") {
  std::istringstream in("g,a\n1,1\n2,2\n1,2\n");
  const auto f = parse_dataset(in, {"a"}, {2}, "g");
  CHECK(f.groups == std::vector<int>{1, 2, 1});
  std::istringstream bad("g,a\n0,1\n");
  CHECK_THROWS_AS(parse_dataset(bad, {"a"}, {2}, "g"), DataError);
}

TEST_CASE("written CSV reads back", "[dataset_io]") {
  const DatasetMatrix d({3, 2}, {1, 2, 3, 1, 2, 2});
  std::ostringstream os;
  write_dataset_csv(os, {"x", "y"}, d, provenance_line(5, "abc"));
  CHECK(os.str().rfind(std::string("# ordfa ") + library_version() + " seed=5 config=abc\n", 0) == 0);
  std::istringstream in(os.str());
  CHECK(parse_dataset(in, {"x", "y"}, {3, 2}).data.responses() == d.responses());
}
