#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <list>
#include <optional>
#include <span>
#include <unordered_map>
#include <variant>
#include <vector>

#include "enwalk/dynamics.hpp"
#include "enwalk/graph.hpp"

namespace enwalk {

// Priorities of the four pair features in the transition score:
// p -> common activity, q -> success rate, r -> fraudulence, s -> mentions.
struct BiasWeights {
  double p = 0.25;
  double q = 0.25;
  double r = 0.25;
  double s = 0.25;

  void validate() const;
};

enum class Direction { kOut, kUndirected };

struct EnwalkStrategy {
  BiasWeights bias;
};

// First-order walk proportional to edge weight.
struct UniformStrategy {};

// Second-order return / in-out reweighting: 1/return_param for going back,
// 1 for staying at distance one from the previous node, 1/inout_param otherwise.
struct ReturnInOutStrategy {
  double return_param = 1.0;
  double inout_param = 1.0;
};

using WalkStrategy = std::variant<EnwalkStrategy, UniformStrategy, ReturnInOutStrategy>;

struct WalkConfig {
  std::uint32_t walks_per_node = 10;
  std::uint32_t walk_length = 80;
  std::uint64_t seed = 1;
  Direction direction = Direction::kOut;
  WalkStrategy strategy = EnwalkStrategy{};
  unsigned workers = 1;
  // Capacity of each worker's LRU memo of second-order distributions.
  std::size_t cache_capacity = 1 << 16;

  void validate() const;
};

using Walk = std::vector<NodeIndex>;

struct WalkCorpus {
  std::vector<Walk> walks;

  std::size_t token_count() const;
};

// Adjacency under a chosen direction. The undirected view merges u->v and
// v->u into one neighbor whose weight is the sum of both.
class NeighborView {
 public:
  NeighborView(const SpamGraph& graph, Direction direction);

  std::size_t node_count() const noexcept { return offsets_.size() - 1; }
  std::span<const Neighbor> neighbors(NodeIndex v) const;
  bool adjacent(NodeIndex from, NodeIndex to) const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> adj_;
};

// Transition score of moving v -> x having arrived from `prev`. Without a
// previous node the prev-dependent half is zero.
double alpha(std::optional<NodeIndex> prev, NodeIndex v, NodeIndex x, const BiasWeights& bias,
             const DynamicsTable& dynamics);

// LRU memo from (prev, v) to a cumulative transition distribution.
class TransitionCache {
 public:
  explicit TransitionCache(std::size_t capacity) : capacity_(capacity) {}

  const std::vector<double>* find(std::uint64_t key);
  const std::vector<double>& insert(std::uint64_t key, std::vector<double> cumulative);
  std::size_t size() const noexcept { return index_.size(); }

 private:
  using Entry = std::pair<std::uint64_t, std::vector<double>>;
  std::size_t capacity_;
  std::list<Entry> order_;
  std::unordered_map<std::uint64_t, std::list<Entry>::iterator> index_;
};

class Walker {
 public:
  // `dynamics` is required for the ENWalk strategy and ignored otherwise.
  Walker(const SpamGraph& graph, WalkConfig config, const DynamicsTable* dynamics = nullptr);

  const NeighborView& view() const noexcept { return view_; }
  const WalkConfig& config() const noexcept { return config_; }

  // Probabilities aligned with view().neighbors(v); empty at a dead end.
  std::vector<double> transition_distribution(std::optional<NodeIndex> prev, NodeIndex v) const;

  // Deterministic in (seed, start, repetition). Stops early at dead ends.
  Walk sample_walk(NodeIndex start, std::uint32_t repetition, TransitionCache* cache = nullptr) const;

  // walks_per_node walks from every node; start order reshuffled per
  // repetition. Output order does not depend on the worker count.
  WalkCorpus generate_corpus() const;

 private:
  std::vector<double> raw_weights(std::optional<NodeIndex> prev, NodeIndex v) const;

  const SpamGraph* graph_;
  WalkConfig config_;
  const DynamicsTable* dynamics_;
  NeighborView view_;
};

// One walk per line, space-separated original node ids.
void write_walks(std::ostream& out, const WalkCorpus& corpus, const SpamGraph& graph);
WalkCorpus read_walks(std::istream& in, const SpamGraph& graph, const std::string& source = "walks");

}  // namespace enwalk
