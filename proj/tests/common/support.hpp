#pragma once

#include <initializer_list>
#include <string>
#include <utility>

#include "enwalk/graph.hpp"

namespace enwalk::testing {

inline UserRecord record(std::uint64_t followers, std::uint64_t followings) {
  UserRecord r;
  r.followers = followers;
  r.followings = followings;
  return r;
}

// Nodes named "n0".."n{count-1}" with default records.
inline SpamGraph graph_from_edges(std::size_t count,
                                  std::initializer_list<std::pair<NodeIndex, NodeIndex>> edges) {
  SpamGraph::Builder b;
  for (std::size_t i = 0; i < count; ++i) b.add_node("n" + std::to_string(i), {});
  for (auto [u, v] : edges) b.add_edge(u, v);
  return std::move(b).build();
}

}  // namespace enwalk::testing

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <vector>

namespace enwalk::testing {

// Five users with distinct behaviour and a mix of weights, out-degrees 1..3.
inline SpamGraph five_node_graph() {
  auto make = [](std::uint64_t fol, std::uint64_t fing, std::vector<std::uint32_t> days, std::uint64_t fraud,
                 std::uint64_t total, std::initializer_list<const char*> tokens) {
    UserRecord r;
    r.followers = fol;
    r.followings = fing;
    r.active_days = std::move(days);
    r.fraud_tweets = fraud;
    r.total_tweets = total;
    for (const char* t : tokens) r.mentions[t] = 1;
    return r;
  };
  SpamGraph::Builder b;
  b.add_node("a", make(30, 10, {1, 2, 3, 4}, 3, 10, {"#deal", "@x"}));
  b.add_node("b", make(25, 10, {2, 3, 4, 5}, 4, 10, {"#deal"}));
  b.add_node("c", make(3, 40, {10, 11}, 9, 10, {"@promo", "@x"}));
  b.add_node("d", make(12, 12, {1, 10, 20}, 0, 10, {}));
  b.add_node("e", make(5, 60, {10, 12}, 8, 10, {"@promo"}));
  b.add_edge("a", "b");
  b.add_edge("a", "c", 2.0);
  b.add_edge("a", "d");
  b.add_edge("b", "a");
  b.add_edge("b", "c");
  b.add_edge("c", "d", 0.5);
  b.add_edge("c", "e");
  b.add_edge("c", "a");
  b.add_edge("d", "a");
  b.add_edge("e", "c");
  return std::move(b).build();
}

// Transition score computed straight from the records, without the library's
// pair-feature code.
inline double oracle_pair_sum(const UserRecord& a, const UserRecord& b, double p, double q, double r, double s) {
  auto jaccard = [](const std::set<std::string>& x, const std::set<std::string>& y) {
    std::set<std::string> u = x;
    u.insert(y.begin(), y.end());
    if (u.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& e : x) common += y.count(e);
    return static_cast<double>(common) / static_cast<double>(u.size());
  };
  std::set<std::string> da, db, ma, mb;
  for (auto d : a.active_days) da.insert(std::to_string(d));
  for (auto d : b.active_days) db.insert(std::to_string(d));
  for (const auto& [t, c] : a.mentions) ma.insert(t);
  for (const auto& [t, c] : b.mentions) mb.insert(t);
  auto ratio = [](const UserRecord& u) {
    return std::max(1.0, static_cast<double>(u.followers) / std::max<double>(1.0, static_cast<double>(u.followings)));
  };
  auto fraud = [](const UserRecord& u) {
    return static_cast<double>(u.fraud_tweets) / std::max<double>(1.0, static_cast<double>(u.total_tweets));
  };
  const double sr = std::clamp(1.0 - std::abs(ratio(a) - ratio(b)), 0.0, 1.0);
  const double fr = 1.0 - std::abs(fraud(a) - fraud(b));
  return p * jaccard(da, db) + q * sr + r * fr + s * jaccard(ma, mb);
}

// Exact next-step distribution over out-neighbors of v (out view).
inline std::vector<double> oracle_enwalk_step(const SpamGraph& g, std::optional<NodeIndex> prev, NodeIndex v,
                                              double p, double q, double r, double s) {
  const auto nb = g.out_neighbors(v);
  std::vector<double> w;
  double total = 0.0;
  for (const Neighbor& n : nb) {
    double score = oracle_pair_sum(g.record(v), g.record(n.node), p, q, r, s);
    if (prev) score += oracle_pair_sum(g.record(*prev), g.record(v), p, q, r, s);
    w.push_back(score * n.weight);
    total += w.back();
  }
  if (total == 0.0) {
    w.clear();
    for (const Neighbor& n : nb) {
      w.push_back(n.weight);
      total += n.weight;
    }
  }
  for (double& x : w) x /= total;
  return w;
}

}  // namespace enwalk::testing
