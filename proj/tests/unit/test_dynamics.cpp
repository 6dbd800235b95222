#include <set>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "enwalk/dynamics.hpp"
#include "enwalk/rng.hpp"
#include "support.hpp"

using namespace enwalk;
using enwalk::testing::record;

namespace {

UserRecord with_days(std::vector<std::uint32_t> days) {
  UserRecord r;
  r.active_days = std::move(days);
  return r;
}

UserRecord with_mentions(std::initializer_list<const char*> tokens) {
  UserRecord r;
  for (const char* t : tokens) r.mentions[t] = 1;
  return r;
}

NodeStats ratio(double sr) {
  NodeStats s;
  s.success_rate = sr;
  s.clamped_ratio = std::max(1.0, sr);
  return s;
}

NodeStats fraud(double fr) {
  NodeStats s;
  s.fraudulence = fr;
  return s;
}

// Jaccard computed with std::set, independent of the merge-based code.
double set_jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::set<std::string> u = a;
  u.insert(b.begin(), b.end());
  if (u.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& x : a) common += b.count(x);
  return static_cast<double>(common) / static_cast<double>(u.size());
}

UserRecord random_record(Rng& rng) {
  UserRecord r;
  r.followers = rng.below(50);
  r.followings = rng.below(50);
  r.total_tweets = rng.below(40);
  r.fraud_tweets = r.total_tweets ? rng.below(r.total_tweets + 1) : 0;
  const auto days = rng.below(12);
  for (std::uint64_t i = 0; i < days; ++i) r.active_days.push_back(static_cast<std::uint32_t>(rng.below(30)));
  const auto tokens = rng.below(6);
  for (std::uint64_t i = 0; i < tokens; ++i) r.mentions["@t" + std::to_string(rng.below(10))] += 1 + rng.below(3);
  normalize_record(r);
  return r;
}

}  // namespace

TEST_CASE("success rate") {
  CHECK(node_stats(record(10, 5)).success_rate == 2.0);
  CHECK(node_stats(record(7, 7)).success_rate == 1.0);
  CHECK(node_stats(record(4, 0)).success_rate == 4.0);
  CHECK(node_stats(record(0, 0)).success_rate == 0.0);
  CHECK(node_stats(record(3, 12)).clamped_ratio == 1.0);
}

TEST_CASE("fraudulence") {
  UserRecord r;
  CHECK(node_stats(r).fraudulence == 0.0);
  r.fraud_tweets = 3;
  r.total_tweets = 8;
  CHECK(node_stats(r).fraudulence == 3.0 / 8.0);
  r.fraud_tweets = 8;
  CHECK(node_stats(r).fraudulence == 1.0);
}

TEST_CASE("activity window") {
  CHECK(node_stats(with_days({})).activity_window == 0);
  CHECK(node_stats(with_days({5})).activity_window == 1);
  CHECK(node_stats(with_days({3, 10, 140})).activity_window == 138);
}

TEST_CASE("common activity time") {
  const std::vector<std::uint32_t> a{1, 2, 3}, b{2, 3, 4}, empty{}, five{5};
  CHECK(pair_common_time(a, b) == 0.5);
  CHECK(pair_common_time(a, a) == 1.0);
  CHECK(pair_common_time(empty, five) == 0.0);
  CHECK(pair_common_time(empty, empty) == 0.0);
  CHECK(pair_common_time(std::vector<std::uint32_t>{1, 4, 7}, std::vector<std::uint32_t>{2, 4, 9, 11}) ==
        1.0 / 6.0);
}

TEST_CASE("success rate agreement") {
  CHECK(pair_success(ratio(2.0), ratio(2.0)) == 1.0);
  CHECK(pair_success(ratio(0.5), ratio(0.8)) == 1.0);
  CHECK(pair_success(ratio(1.0), ratio(3.5)) == 0.0);
  CHECK(pair_success(ratio(1.25), ratio(1.5)) == 0.75);
}

TEST_CASE("fraudulence agreement") {
  CHECK(pair_fraud(fraud(0.3), fraud(0.3)) == 1.0);
  CHECK(pair_fraud(fraud(0.0), fraud(1.0)) == 0.0);
  CHECK(pair_fraud(fraud(0.34), fraud(0.86)) == doctest::Approx(0.48).epsilon(1e-12));
  CHECK(pair_fraud(fraud(0.25), fraud(0.75)) == 0.5);
}

TEST_CASE("common mentions") {
  CHECK(pair_mentions(with_mentions({"@a", "@b"}), with_mentions({"@b", "@c"})) == 1.0 / 3.0);
  CHECK(pair_mentions(with_mentions({"@a", "#b"}), with_mentions({"@a", "#b"})) == 1.0);
  CHECK(pair_mentions(with_mentions({}), with_mentions({"@x"})) == 0.0);
  CHECK(pair_mentions(with_mentions({}), with_mentions({})) == 0.0);
  // Counts do not matter, only distinct tokens.
  UserRecord heavy = with_mentions({"@a"});
  heavy.mentions["@a"] = 40;
  CHECK(pair_mentions(heavy, with_mentions({"@a", "@z"})) == 0.5);
}

TEST_CASE("self pair with activity") {
  UserRecord r = with_days({2, 5});
  r.followers = 9;
  r.followings = 2;
  r.fraud_tweets = 1;
  r.total_tweets = 3;
  const NodeStats s = node_stats(r);
  const PairDynamics d = pair_dynamics(r, s, r, s);
  CHECK(d.ct == 1.0);
  CHECK(d.sr == 1.0);
  CHECK(d.fr == 1.0);
  CHECK(d.me == 0.0);
}

TEST_CASE("maximally different pair") {
  UserRecord a = with_days({1});
  UserRecord b = with_days({2});
  a.mentions["@a"] = 1;
  b.mentions["@b"] = 1;
  a.followers = 5;
  a.followings = 1;
  b.total_tweets = 4;
  b.fraud_tweets = 4;
  const PairDynamics d = pair_dynamics(a, node_stats(a), b, node_stats(b));
  CHECK(d == PairDynamics{0.0, 0.0, 0.0, 0.0});
}

TEST_CASE("random pairs match independent recomputation and lie in [0,1]") {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const UserRecord a = random_record(rng);
    const UserRecord b = random_record(rng);
    const NodeStats sa = node_stats(a), sb = node_stats(b);
    const PairDynamics d = pair_dynamics(a, sa, b, sb);
    const PairDynamics rev = pair_dynamics(b, sb, a, sa);
    CHECK(d == rev);

    std::set<std::string> da, db, ma, mb;
    for (auto x : a.active_days) da.insert(std::to_string(x));
    for (auto x : b.active_days) db.insert(std::to_string(x));
    for (const auto& [t, _] : a.mentions) ma.insert(t);
    for (const auto& [t, _] : b.mentions) mb.insert(t);
    CHECK(d.ct == set_jaccard(da, db));
    CHECK(d.me == set_jaccard(ma, mb));

    const double ra = static_cast<double>(a.followers) / std::max<double>(1, a.followings);
    const double rb = static_cast<double>(b.followers) / std::max<double>(1, b.followings);
    CHECK(d.sr == std::clamp(1.0 - std::abs(std::max(1.0, ra) - std::max(1.0, rb)), 0.0, 1.0));
    const double fa = static_cast<double>(a.fraud_tweets) / std::max<double>(1, a.total_tweets);
    const double fb = static_cast<double>(b.fraud_tweets) / std::max<double>(1, b.total_tweets);
    CHECK(d.fr == 1.0 - std::abs(fa - fb));

    for (double c : {d.ct, d.sr, d.fr, d.me}) {
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
    }
  }
}

TEST_CASE("dynamics table memoizes symmetric pairs under concurrency") {
  SpamGraph::Builder b;
  Rng rng(7);
  for (int i = 0; i < 40; ++i) b.add_node("n" + std::to_string(i), random_record(rng));
  for (NodeIndex i = 0; i < 40; ++i) b.add_edge(i, (i * 7 + 3) % 40);
  const SpamGraph g = std::move(b).build();
  DynamicsTable table(g);

  std::vector<std::jthread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&table] {
      for (NodeIndex u = 0; u < 40; ++u)
        for (NodeIndex v = 0; v < 40; ++v) table.pair(u, v);
    });
  }
  threads.clear();
  CHECK(table.memo_size() <= 40 * 41 / 2);
  for (NodeIndex u = 0; u < 40; ++u) {
    for (NodeIndex v = 0; v < 40; ++v) {
      const PairDynamics want = pair_dynamics(g.record(u), node_stats(g.record(u)), g.record(v), node_stats(g.record(v)));
      CHECK(table.pair(u, v) == want);
    }
  }

  std::ostringstream out;
  write_pairs_tsv(out, table);
  std::size_t lines = 0;
  for (char c : out.str()) lines += c == '\n';
  CHECK(lines == g.edge_count());
}
