#include "enwalk/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <ostream>

#include "enwalk/rng.hpp"

namespace enwalk {

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

template <typename It, typename Less>
std::size_t intersection_size(It a, It a_end, It b, It b_end, Less less) {
  std::size_t common = 0;
  while (a != a_end && b != b_end) {
    if (less(*a, *b)) {
      ++a;
    } else if (less(*b, *a)) {
      ++b;
    } else {
      ++common;
      ++a;
      ++b;
    }
  }
  return common;
}

}  // namespace

NodeStats node_stats(const UserRecord& record) {
  NodeStats s;
  s.success_rate = static_cast<double>(record.followers) /
                   static_cast<double>(std::max<std::uint64_t>(1, record.followings));
  s.fraudulence = static_cast<double>(record.fraud_tweets) /
                  static_cast<double>(std::max<std::uint64_t>(1, record.total_tweets));
  s.fraudulence = clamp01(s.fraudulence);
  if (!record.active_days.empty()) {
    const auto [lo, hi] = std::minmax_element(record.active_days.begin(), record.active_days.end());
    s.activity_window = *hi - *lo + 1;
  }
  s.clamped_ratio = std::max(1.0, s.success_rate);
  return s;
}

double pair_common_time(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.empty() && b.empty()) return 0.0;
  const std::size_t common = intersection_size(a.begin(), a.end(), b.begin(), b.end(), std::less<>{});
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

double pair_success(const NodeStats& a, const NodeStats& b) {
  return clamp01(1.0 - std::abs(std::max(1.0, a.clamped_ratio) - std::max(1.0, b.clamped_ratio)));
}

double pair_fraud(const NodeStats& a, const NodeStats& b) {
  return clamp01(1.0 - std::abs(a.fraudulence - b.fraudulence));
}

double pair_mentions(const UserRecord& a, const UserRecord& b) {
  if (a.mentions.empty() && b.mentions.empty()) return 0.0;
  const std::size_t common = intersection_size(
      a.mentions.begin(), a.mentions.end(), b.mentions.begin(), b.mentions.end(),
      [](const auto& x, const auto& y) { return x.first < y.first; });
  return static_cast<double>(common) / static_cast<double>(a.mentions.size() + b.mentions.size() - common);
}

PairDynamics pair_dynamics(const UserRecord& a, const NodeStats& stats_a, const UserRecord& b,
                           const NodeStats& stats_b) {
  return {
      pair_common_time(a.active_days, b.active_days),
      pair_success(stats_a, stats_b),
      pair_fraud(stats_a, stats_b),
      pair_mentions(a, b),
  };
}

DynamicsTable::DynamicsTable(const SpamGraph& graph)
    : graph_(&graph), shards_(std::make_unique<std::array<Shard, kShards>>()) {
  stats_.reserve(graph.node_count());
  for (NodeIndex v = 0; v < graph.node_count(); ++v) stats_.push_back(node_stats(graph.record(v)));
}

PairDynamics DynamicsTable::pair(NodeIndex a, NodeIndex b) const {
  const NodeIndex lo = std::min(a, b);
  const NodeIndex hi = std::max(a, b);
  const std::uint64_t key = (static_cast<std::uint64_t>(lo) << 32) | hi;
  Shard& shard = (*shards_)[mix64(key) % kShards];
  {
    std::shared_lock lock(shard.mutex);
    if (auto it = shard.memo.find(key); it != shard.memo.end()) return it->second;
  }
  // Computed from the canonical (lo, hi) order so the result is symmetric
  // bit for bit.
  const PairDynamics value = pair_dynamics(graph_->record(lo), stats_[lo], graph_->record(hi), stats_[hi]);
  std::unique_lock lock(shard.mutex);
  shard.memo.try_emplace(key, value);
  return value;
}

std::size_t DynamicsTable::memo_size() const {
  std::size_t total = 0;
  for (const Shard& shard : *shards_) {
    std::shared_lock lock(shard.mutex);
    total += shard.memo.size();
  }
  return total;
}

void write_pairs_tsv(std::ostream& out, const DynamicsTable& table) {
  const SpamGraph& g = table.graph();
  const auto old_precision = out.precision(6);
  for (const Edge& e : g.edges()) {
    const PairDynamics d = table.pair(e.src, e.dst);
    out << g.id(e.src) << '\t' << g.id(e.dst) << '\t' << d.ct << '\t' << d.sr << '\t' << d.fr << '\t' << d.me
        << '\n';
  }
  out.precision(old_precision);
}

}  // namespace enwalk
