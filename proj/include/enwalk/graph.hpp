#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace enwalk {

using NodeIndex = std::uint32_t;

inline constexpr std::size_t kTrustFeatureCount = 8;

// blacklist-URL count, tweet count, mention count, duplicate-tweet count,
// adult/bad-word tweets, violent-word tweets, promotional tweets, active days.
using TrustFeatures = std::array<double, kTrustFeatureCount>;

struct UserRecord {
  std::uint64_t followers = 0;
  std::uint64_t followings = 0;
  // Day indices since the dataset epoch; kept sorted and unique.
  std::vector<std::uint32_t> active_days;
  std::uint64_t fraud_tweets = 0;
  std::uint64_t total_tweets = 0;
  // Mention token (handle or hashtag) -> positive count. Ordered so that
  // serialization is deterministic.
  std::map<std::string, std::uint64_t> mentions;
  TrustFeatures trust_features{};
  std::optional<bool> suspended;

  bool operator==(const UserRecord&) const = default;
};

// Throws ValidationError when a record breaks the counter invariants.
// Sorts and deduplicates active_days in place.
void normalize_record(UserRecord& record);

struct Edge {
  NodeIndex src;
  NodeIndex dst;
  double weight;

  bool operator==(const Edge&) const = default;
};

struct Neighbor {
  NodeIndex node;
  double weight;
};

struct LoadStats {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicate_edges_merged = 0;
  std::size_t defaulted_records = 0;
};

// Directed weighted follower graph. An edge u -> v means "u follows v".
// Immutable once built; safe for concurrent readers.
class SpamGraph {
 public:
  class Builder;

  std::size_t node_count() const noexcept { return ids_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  // Sorted by (src, dst).
  std::span<const Edge> edges() const noexcept { return edges_; }

  // Both adjacency lists are sorted by neighbor index.
  std::span<const Neighbor> out_neighbors(NodeIndex v) const;
  std::span<const Neighbor> in_neighbors(NodeIndex v) const;

  const UserRecord& record(NodeIndex v) const { return records_.at(v); }
  // True when the node appeared only in the edge list.
  bool record_defaulted(NodeIndex v) const { return defaulted_.at(v) != 0; }

  const std::string& id(NodeIndex v) const { return ids_.at(v); }
  std::span<const std::string> ids() const noexcept { return ids_; }

  // Throws LookupError for unknown ids.
  NodeIndex index(std::string_view id) const;
  std::optional<NodeIndex> find(std::string_view id) const;

  const LoadStats& load_stats() const noexcept { return stats_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<UserRecord> records_;
  std::vector<std::uint8_t> defaulted_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> out_offsets_;
  std::vector<Neighbor> out_adj_;
  std::vector<std::size_t> in_offsets_;
  std::vector<Neighbor> in_adj_;
  LoadStats stats_;
};

// Nodes are indexed in insertion order. Edges may reference ids that have
// no record yet; those nodes get a default record and are flagged.
class SpamGraph::Builder {
 public:
  // Throws ValidationError on a duplicate id or an invalid record.
  NodeIndex add_node(std::string id, UserRecord record);
  // Throws ValidationError for non-positive or non-finite weights.
  void add_edge(std::string_view src, std::string_view dst, double weight = 1.0);
  void add_edge(NodeIndex src, NodeIndex dst, double weight = 1.0);

  std::size_t node_count() const noexcept { return ids_.size(); }
  std::optional<NodeIndex> find(std::string_view id) const;

  SpamGraph build() &&;

 private:
  NodeIndex intern(std::string_view id);

  std::vector<std::string> ids_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<UserRecord> records_;
  std::vector<std::uint8_t> defaulted_;
  std::vector<Edge> edges_;
  std::size_t self_loops_ = 0;
};

// --- file formats -----------------------------------------------------------

// `src<TAB>dst[<TAB>weight]`, `#` comment lines and blank lines skipped.
void read_edges_tsv(std::istream& in, SpamGraph::Builder& builder, const std::string& source = "edges");
// One JSON object per line.
void read_users_jsonl(std::istream& in, SpamGraph::Builder& builder, const std::string& source = "users");

UserRecord parse_user_record(std::string_view json_line, std::string* id_out);
std::string format_user_record(const std::string& id, const UserRecord& record);

SpamGraph load_graph(const std::filesystem::path& edges_path, const std::filesystem::path& users_path);

void write_edges_tsv(std::ostream& out, const SpamGraph& graph);
void write_users_jsonl(std::ostream& out, const SpamGraph& graph);
void save_graph(const SpamGraph& graph, const std::filesystem::path& edges_path,
                const std::filesystem::path& users_path);

// --- labels -----------------------------------------------------------------

// Per-node spammer label indexed by NodeIndex: 1 = suspended/spammer.
using Labels = std::vector<std::uint8_t>;

// `node<TAB>0|1`. Unknown node ids raise LookupError.
std::unordered_map<std::string, bool> read_labels_tsv(std::istream& in, const std::string& source = "labels");
void write_labels_tsv(std::ostream& out, const SpamGraph& graph, const Labels& labels);

// Record's suspended flag (missing = 0), overridden by `overrides`.
Labels resolve_labels(const SpamGraph& graph, const std::unordered_map<std::string, bool>& overrides = {});

}  // namespace enwalk
