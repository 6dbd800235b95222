#include "enwalk/walker.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "enwalk/errors.hpp"
#include "enwalk/rng.hpp"

namespace enwalk {

namespace {

constexpr std::uint64_t kNoPrev = 0xffffffffULL;

std::uint64_t cache_key(std::optional<NodeIndex> prev, NodeIndex v) {
  return ((prev ? static_cast<std::uint64_t>(*prev) : kNoPrev) << 32) | v;
}

std::vector<double> cumulate(std::vector<double> probs) {
  double acc = 0.0;
  for (double& p : probs) {
    acc += p;
    p = acc;
  }
  return probs;
}

std::size_t draw(const std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace

void BiasWeights::validate() const {
  for (double w : {p, q, r, s}) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("bias weights must be finite and non-negative");
  }
  if (p + q + r + s <= 0.0) throw ConfigError("bias weights must not all be zero");
}

void WalkConfig::validate() const {
  if (walks_per_node < 1) throw ConfigError("walks per node must be >= 1");
  if (walk_length < 1) throw ConfigError("walk length must be >= 1");
  if (workers < 1) throw ConfigError("worker count must be >= 1");
  if (const auto* e = std::get_if<EnwalkStrategy>(&strategy)) e->bias.validate();
  if (const auto* ri = std::get_if<ReturnInOutStrategy>(&strategy)) {
    if (!std::isfinite(ri->return_param) || !std::isfinite(ri->inout_param) || ri->return_param <= 0.0 ||
        ri->inout_param <= 0.0) {
      throw ConfigError("return and in-out parameters must be positive");
    }
  }
}

std::size_t WalkCorpus::token_count() const {
  std::size_t n = 0;
  for (const Walk& w : walks) n += w.size();
  return n;
}

// --- NeighborView -------------------------------------------------------------

NeighborView::NeighborView(const SpamGraph& graph, Direction direction) {
  const std::size_t n = graph.node_count();
  offsets_.assign(n + 1, 0);
  if (direction == Direction::kOut) {
    adj_.reserve(graph.edge_count());
    for (NodeIndex v = 0; v < n; ++v) {
      const auto out = graph.out_neighbors(v);
      adj_.insert(adj_.end(), out.begin(), out.end());
      offsets_[v + 1] = adj_.size();
    }
    return;
  }
  adj_.reserve(2 * graph.edge_count());
  for (NodeIndex v = 0; v < n; ++v) {
    const auto out = graph.out_neighbors(v);
    const auto in = graph.in_neighbors(v);
    auto o = out.begin();
    auto i = in.begin();
    // Merge two sorted lists, summing weights of reciprocal edges.
    while (o != out.end() || i != in.end()) {
      if (i == in.end() || (o != out.end() && o->node < i->node)) {
        adj_.push_back(*o++);
      } else if (o == out.end() || i->node < o->node) {
        adj_.push_back(*i++);
      } else {
        adj_.push_back({o->node, o->weight + i->weight});
        ++o;
        ++i;
      }
    }
    offsets_[v + 1] = adj_.size();
  }
}

std::span<const Neighbor> NeighborView::neighbors(NodeIndex v) const {
  return {adj_.data() + offsets_.at(v), adj_.data() + offsets_.at(v + 1)};
}

bool NeighborView::adjacent(NodeIndex from, NodeIndex to) const {
  const auto nb = neighbors(from);
  return std::binary_search(nb.begin(), nb.end(), Neighbor{to, 0.0},
                            [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
}

// --- transition scores --------------------------------------------------------

double alpha(std::optional<NodeIndex> prev, NodeIndex v, NodeIndex x, const BiasWeights& bias,
             const DynamicsTable& dynamics) {
  PairDynamics sum = dynamics.pair(v, x);
  if (prev) {
    const PairDynamics tv = dynamics.pair(*prev, v);
    sum.ct += tv.ct;
    sum.sr += tv.sr;
    sum.fr += tv.fr;
    sum.me += tv.me;
  }
  return bias.p * sum.ct + bias.q * sum.sr + bias.r * sum.fr + bias.s * sum.me;
}

const std::vector<double>* TransitionCache::find(std::uint64_t key) {
  const auto it = index_.find(key);
  if (it == index_.end()) return nullptr;
  order_.splice(order_.begin(), order_, it->second);
  return &it->second->second;
}

const std::vector<double>& TransitionCache::insert(std::uint64_t key, std::vector<double> cumulative) {
  if (const auto it = index_.find(key); it != index_.end()) {
    it->second->second = std::move(cumulative);
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
  }
  if (capacity_ > 0 && index_.size() >= capacity_) {
    index_.erase(order_.back().first);
    order_.pop_back();
  }
  order_.emplace_front(key, std::move(cumulative));
  index_.emplace(key, order_.begin());
  return order_.front().second;
}

// --- Walker -------------------------------------------------------------------

Walker::Walker(const SpamGraph& graph, WalkConfig config, const DynamicsTable* dynamics)
    : graph_(&graph), config_(std::move(config)), dynamics_(dynamics), view_(graph, config_.direction) {
  config_.validate();
  if (std::holds_alternative<EnwalkStrategy>(config_.strategy)) {
    if (dynamics_ == nullptr) throw ConfigError("ENWalk strategy needs a dynamics table");
    if (&dynamics_->graph() != graph_) throw ConfigError("dynamics table belongs to a different graph");
  }
}

std::vector<double> Walker::raw_weights(std::optional<NodeIndex> prev, NodeIndex v) const {
  const auto nb = view_.neighbors(v);
  std::vector<double> w(nb.size());
  for (std::size_t i = 0; i < nb.size(); ++i) w[i] = nb[i].weight;

  if (const auto* e = std::get_if<EnwalkStrategy>(&config_.strategy)) {
    std::vector<double> biased(nb.size());
    double total = 0.0;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      biased[i] = alpha(prev, v, nb[i].node, e->bias, *dynamics_) * w[i];
      total += biased[i];
    }
    // All-zero scores fall back to the weight-proportional step.
    if (total > 0.0) w = std::move(biased);
  } else if (const auto* ri = std::get_if<ReturnInOutStrategy>(&config_.strategy)) {
    if (prev) {
      for (std::size_t i = 0; i < nb.size(); ++i) {
        const NodeIndex x = nb[i].node;
        if (x == *prev) {
          w[i] /= ri->return_param;
        } else if (!view_.adjacent(*prev, x)) {
          w[i] /= ri->inout_param;
        }
      }
    }
  }
  return w;
}

std::vector<double> Walker::transition_distribution(std::optional<NodeIndex> prev, NodeIndex v) const {
  std::vector<double> w = raw_weights(prev, v);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

Walk Walker::sample_walk(NodeIndex start, std::uint32_t repetition, TransitionCache* cache) const {
  Rng rng(derive_seed(config_.seed, {start, repetition}));
  const bool second_order = !std::holds_alternative<UniformStrategy>(config_.strategy);
  Walk walk;
  walk.reserve(config_.walk_length + 1);
  walk.push_back(start);
  std::optional<NodeIndex> prev;
  NodeIndex cur = start;
  std::vector<double> scratch;
  for (std::uint32_t step = 0; step < config_.walk_length; ++step) {
    const auto nb = view_.neighbors(cur);
    if (nb.empty()) break;
    // First-order strategies only depend on the current node.
    const std::optional<NodeIndex> key_prev = second_order ? prev : std::nullopt;
    const std::vector<double>* cumulative = nullptr;
    if (cache) {
      const std::uint64_t key = cache_key(key_prev, cur);
      cumulative = cache->find(key);
      if (!cumulative) cumulative = &cache->insert(key, cumulate(transition_distribution(key_prev, cur)));
    } else {
      scratch = cumulate(transition_distribution(key_prev, cur));
      cumulative = &scratch;
    }
    const NodeIndex next = nb[draw(*cumulative, rng)].node;
    walk.push_back(next);
    prev = cur;
    cur = next;
  }
  return walk;
}

WalkCorpus Walker::generate_corpus() const {
  const std::size_t n = graph_->node_count();
  WalkCorpus corpus;
  corpus.walks.resize(n * config_.walks_per_node);

  struct Task {
    NodeIndex start;
    std::uint32_t repetition;
  };
  std::vector<Task> tasks;
  tasks.reserve(corpus.walks.size());
  std::vector<NodeIndex> order(n);
  for (std::uint32_t rep = 0; rep < config_.walks_per_node; ++rep) {
    std::iota(order.begin(), order.end(), NodeIndex{0});
    Rng rng(derive_seed(config_.seed, {0x5748554646ULL, rep}));
    shuffle(order, rng);
    for (NodeIndex start : order) tasks.push_back({start, rep});
  }

  const unsigned workers = std::max(1u, std::min<unsigned>(config_.workers, static_cast<unsigned>(tasks.size())));
  auto run = [&](std::size_t begin, std::size_t end) {
    TransitionCache cache(config_.cache_capacity);
    for (std::size_t i = begin; i < end; ++i) {
      corpus.walks[i] = sample_walk(tasks[i].start, tasks[i].repetition, &cache);
    }
  };
  if (workers <= 1) {
    run(0, tasks.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (tasks.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(tasks.size(), begin + chunk);
      if (begin < end) pool.emplace_back(run, begin, end);
    }
  }
  return corpus;
}

// --- I/O ----------------------------------------------------------------------

void write_walks(std::ostream& out, const WalkCorpus& corpus, const SpamGraph& graph) {
  for (const Walk& walk : corpus.walks) {
    for (std::size_t i = 0; i < walk.size(); ++i) {
      if (i) out << ' ';
      out << graph.id(walk[i]);
    }
    out << '\n';
  }
}

WalkCorpus read_walks(std::istream& in, const SpamGraph& graph, const std::string& source) {
  WalkCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream tokens(line);
    Walk walk;
    std::string id;
    while (tokens >> id) {
      const auto v = graph.find(id);
      if (!v) throw ParseError(source, line_no, "unknown node id '" + id + "'");
      walk.push_back(*v);
    }
    if (walk.empty()) throw ParseError(source, line_no, "empty walk");
    corpus.walks.push_back(std::move(walk));
  }
  if (in.bad()) throw IoError("read failure on " + source);
  return corpus;
}

}  // namespace enwalk
