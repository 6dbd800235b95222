#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "enwalk/graph.hpp"

namespace enwalk {

// Per-node spam statistics.
struct NodeStats {
  double success_rate = 0.0;          // followers / max(1, followings)
  double fraudulence = 0.0;           // fraud tweets / max(1, total tweets), in [0,1]
  std::uint32_t activity_window = 0;  // last - first + 1 active day, 0 when inactive
  double clamped_ratio = 1.0;         // max(1, success_rate)
};

NodeStats node_stats(const UserRecord& record);

// Pairwise equivalence of two users; every component lies in [0,1] and
// higher means more alike.
struct PairDynamics {
  double ct = 0.0;  // common activity
  double sr = 0.0;  // success-rate agreement
  double fr = 0.0;  // fraudulence agreement
  double me = 0.0;  // common mentions

  bool operator==(const PairDynamics&) const = default;
};

// Jaccard of two sorted, duplicate-free day sets; 0 when both are empty.
double pair_common_time(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);
// 1 - |max(1, ratio_a) - max(1, ratio_b)|, clamped into [0,1].
double pair_success(const NodeStats& a, const NodeStats& b);
double pair_fraud(const NodeStats& a, const NodeStats& b);
// Jaccard over distinct mention tokens; 0 when both bags are empty.
double pair_mentions(const UserRecord& a, const UserRecord& b);

PairDynamics pair_dynamics(const UserRecord& a, const NodeStats& stats_a, const UserRecord& b,
                           const NodeStats& stats_b);

// Node statistics for a whole graph plus a lazily filled, thread-safe memo of
// pair features keyed by unordered node pair. Only pairs actually queried
// (edges and walk triples) are ever stored.
class DynamicsTable {
 public:
  explicit DynamicsTable(const SpamGraph& graph);

  const NodeStats& stats(NodeIndex v) const { return stats_.at(v); }
  PairDynamics pair(NodeIndex a, NodeIndex b) const;

  std::size_t memo_size() const;
  const SpamGraph& graph() const noexcept { return *graph_; }

 private:
  static constexpr std::size_t kShards = 16;

  struct Shard {
    mutable std::shared_mutex mutex;
    std::unordered_map<std::uint64_t, PairDynamics> memo;
  };

  const SpamGraph* graph_;
  std::vector<NodeStats> stats_;
  std::unique_ptr<std::array<Shard, kShards>> shards_;
};

// `src<TAB>dst<TAB>ct<TAB>sr<TAB>fr<TAB>me`, one line per edge.
void write_pairs_tsv(std::ostream& out, const DynamicsTable& table);

}  // namespace enwalk
