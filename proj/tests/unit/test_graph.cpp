#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "enwalk/errors.hpp"
#include "enwalk/graph.hpp"
#include "support.hpp"

using namespace enwalk;

namespace {

const char* kUsers =
    R"({"id":"a","followers":10,"followings":5,"active_days":[3,1,2,2],"fraud_tweets":1,"total_tweets":4,"mentions":{"@x":2},"suspended":true})"
    "\n"
    R"({"id":"b","followers":0,"followings":7,"active_days":[],"fraud_tweets":0,"total_tweets":0,"mentions":{}})"
    "\n";

SpamGraph load_from_strings(const std::string& edges, const std::string& users) {
  SpamGraph::Builder b;
  std::istringstream u(users), e(edges);
  read_users_jsonl(u, b);
  read_edges_tsv(e, b);
  return std::move(b).build();
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("enwalk_graph_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("two users with reciprocal follows") {
  const SpamGraph g = load_from_strings("a\tb\nb\ta\n", kUsers);
  CHECK(g.node_count() == 2);
  CHECK(g.edge_count() == 2);
  CHECK(g.load_stats().self_loops_dropped == 0);
  CHECK(g.load_stats().defaulted_records == 0);
  REQUIRE(g.out_neighbors(0).size() == 1);
  CHECK(g.out_neighbors(0)[0].node == 1);
  CHECK(g.in_neighbors(0)[0].node == 1);
}

TEST_CASE("self loops are dropped and counted") {
  const SpamGraph g = load_from_strings("a\ta\na\tb\n", kUsers);
  CHECK(g.edge_count() == 1);
  CHECK(g.load_stats().self_loops_dropped == 1);
}

TEST_CASE("edge endpoint without a record gets a default record") {
  const SpamGraph g = load_from_strings("a\tc\n", kUsers);
  CHECK(g.node_count() == 3);
  CHECK(g.load_stats().defaulted_records == 1);
  const NodeIndex c = g.index("c");
  CHECK(g.record_defaulted(c));
  CHECK_FALSE(g.record_defaulted(g.index("a")));
  CHECK(g.record(c) == UserRecord{});
}

TEST_CASE("indexing follows insertion order and is a bijection") {
  const SpamGraph g = load_from_strings("b\tz\n", kUsers);
  CHECK(g.index("a") == 0);
  CHECK(g.index("b") == 1);
  CHECK(g.index("z") == 2);
  for (NodeIndex v = 0; v < g.node_count(); ++v) CHECK(g.index(g.id(v)) == v);
  CHECK(g.id(g.index("a")) == "a");
  CHECK_THROWS_AS(g.index("never-seen"), LookupError);
  CHECK_FALSE(g.find("never-seen").has_value());
}

TEST_CASE("duplicate edges merge by summing weights") {
  const SpamGraph g = load_from_strings("a\tb\t2\na\tb\t0.5\n", kUsers);
  REQUIRE(g.edge_count() == 1);
  CHECK(g.edges()[0].weight == doctest::Approx(2.5));
  CHECK(g.load_stats().duplicate_edges_merged == 1);
}

TEST_CASE("adjacency lists are sorted by neighbor") {
  SpamGraph::Builder b;
  for (const char* id : {"a", "b", "c", "d"}) b.add_node(id, {});
  b.add_edge("a", "d");
  b.add_edge("a", "b");
  b.add_edge("c", "b");
  b.add_edge("a", "c");
  b.add_edge("d", "b");
  const SpamGraph g = std::move(b).build();
  const auto out = g.out_neighbors(0);
  REQUIRE(out.size() == 3);
  CHECK(out[0].node == 1);
  CHECK(out[1].node == 2);
  CHECK(out[2].node == 3);
  const auto in = g.in_neighbors(1);
  REQUIRE(in.size() == 3);
  CHECK(in[0].node == 0);
  CHECK(in[1].node == 2);
  CHECK(in[2].node == 3);
}

TEST_CASE("records are normalized on ingest") {
  const SpamGraph g = load_from_strings("", kUsers);
  const UserRecord& a = g.record(0);
  CHECK(a.active_days == std::vector<std::uint32_t>{1, 2, 3});
  CHECK(a.suspended == true);
  CHECK_FALSE(g.record(1).suspended.has_value());
}

TEST_CASE("malformed input names the offending line") {
  SUBCASE("edge line with one field") {
    try {
      load_from_strings("a\tb\n# comment\n\nbroken\n", kUsers);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
    }
  }
  SUBCASE("non-numeric weight") {
    CHECK_THROWS_AS(load_from_strings("a\tb\theavy\n", kUsers), ParseError);
  }
  SUBCASE("broken json") {
    try {
      load_from_strings("", std::string(kUsers) + "{not json\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("missing required key") {
    CHECK_THROWS_AS(load_from_strings("", R"({"id":"q","followers":1})"), ParseError);
  }
}

TEST_CASE("invalid values are validation errors") {
  CHECK_THROWS_AS(load_from_strings("a\tb\t0\n", kUsers), ValidationError);
  CHECK_THROWS_AS(load_from_strings("a\tb\t-1\n", kUsers), ValidationError);
  CHECK_THROWS_AS(load_from_strings("", std::string(kUsers) + kUsers), ValidationError);
  CHECK_THROWS_AS(
      load_from_strings(
          "", R"({"id":"q","followers":0,"followings":0,"active_days":[],"fraud_tweets":3,"total_tweets":2,"mentions":{}})"),
      ValidationError);
  SpamGraph::Builder b;
  b.add_node("x", {});
  CHECK_THROWS_AS(b.add_edge("x", "y", std::nan("")), ValidationError);
}

TEST_CASE("record serialization round trips") {
  UserRecord r;
  r.followers = 12;
  r.followings = 3;
  r.active_days = {4, 9, 10};
  r.fraud_tweets = 2;
  r.total_tweets = 11;
  r.mentions = {{"#deal", 3}, {"@celeb7", 1}};
  r.trust_features = {1, 2, 3, 4, 5, 6, 7, 8.5};
  r.suspended = false;
  std::string id;
  const UserRecord back = parse_user_record(format_user_record("u1", r), &id);
  CHECK(id == "u1");
  CHECK(back == r);
}

TEST_CASE("graph files round trip through disk") {
  TempDir dir;
  SpamGraph::Builder b;
  b.add_node("a", testing::record(3, 1));
  b.add_edge("a", "b", 2.25);
  b.add_edge("b", "a");
  const SpamGraph g = std::move(b).build();
  save_graph(g, dir.path / "edges.tsv", dir.path / "users.jsonl");
  const SpamGraph back = load_graph(dir.path / "edges.tsv", dir.path / "users.jsonl");
  REQUIRE(back.node_count() == 2);
  REQUIRE(back.edge_count() == 2);
  CHECK(back.edges()[0] == g.edges()[0]);
  CHECK(back.edges()[1] == g.edges()[1]);
  CHECK(back.record(0) == g.record(0));
  // Every node now has a record, so nothing is defaulted on reload.
  CHECK(back.load_stats().defaulted_records == 0);
}

TEST_CASE("missing files are I/O errors") {
  CHECK_THROWS_AS(load_graph("/nonexistent/edges.tsv", "/nonexistent/users.jsonl"), IoError);
}

TEST_CASE("labels resolve from records and overrides") {
  const SpamGraph g = load_from_strings("a\tc\n", kUsers);
  const Labels plain = resolve_labels(g);
  CHECK(plain == Labels{1, 0, 0});
  std::istringstream in("b\t1\n# note\na\t0\n");
  const Labels overridden = resolve_labels(g, read_labels_tsv(in));
  CHECK(overridden == Labels{0, 1, 0});

  std::ostringstream out;
  write_labels_tsv(out, g, overridden);
  CHECK(out.str() == "a\t0\nb\t1\nc\t0\n");

  std::istringstream unknown("zz\t1\n");
  CHECK_THROWS_AS(resolve_labels(g, read_labels_tsv(unknown)), LookupError);
  std::istringstream bad("a\tyes\n");
  CHECK_THROWS_AS(read_labels_tsv(bad), ParseError);
}
