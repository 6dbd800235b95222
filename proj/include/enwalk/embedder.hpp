#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "enwalk/graph.hpp"
#include "enwalk/rng.hpp"
#include "enwalk/walker.hpp"

namespace enwalk {

struct EmbedConfig {
  std::uint32_t dimension = 128;
  std::uint32_t window = 10;
  std::uint32_t negatives = 5;
  std::uint32_t epochs = 5;
  double learning_rate = 0.025;
  double noise_exponent = 0.75;
  std::uint64_t seed = 1;
  // Single worker, corpus order, bit-reproducible.
  bool deterministic = true;
  unsigned workers = 1;

  void validate() const;
};

// Node features f (input vectors) and the context vectors f' used only during
// training. Rows are indexed by NodeIndex.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t dimension);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dimension() const noexcept { return dim_; }

  std::span<double> input(NodeIndex v) { return {input_.data() + std::size_t{v} * dim_, dim_}; }
  std::span<const double> input(NodeIndex v) const { return {input_.data() + std::size_t{v} * dim_, dim_}; }
  std::span<double> output(NodeIndex v) { return {output_.data() + std::size_t{v} * dim_, dim_}; }
  std::span<const double> output(NodeIndex v) const { return {output_.data() + std::size_t{v} * dim_, dim_}; }

  // Row-major rows() x dimension() block of node features.
  std::span<const double> features() const noexcept { return input_; }

  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> input_;
  std::vector<double> output_;
};

// Calls fn(center, context) for every ordered pair of walk positions at
// distance 1..window.
template <typename Fn>
void for_each_context(const WalkCorpus& corpus, std::uint32_t window, Fn&& fn) {
  for (const Walk& walk : corpus.walks) {
    const std::size_t len = walk.size();
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t lo = i > window ? i - window : 0;
      const std::size_t hi = std::min(len - 1, i + window);
      for (std::size_t j = lo; j <= hi; ++j) {
        if (j != i) fn(walk[i], walk[j]);
      }
    }
  }
}

std::uint64_t count_contexts(const WalkCorpus& corpus, std::uint32_t window);

// Unigram^exponent noise over nodes occurring in the corpus, sampled with
// an alias table.
class NoiseDistribution {
 public:
  NoiseDistribution(const WalkCorpus& corpus, std::size_t node_count, double exponent);

  double probability(NodeIndex v) const { return probs_.at(v); }
  std::span<const double> probabilities() const noexcept { return probs_; }
  NodeIndex sample(Rng& rng) const;

 private:
  std::vector<double> probs_;
  std::vector<double> accept_;
  std::vector<NodeIndex> alias_;
};

// exp(f'(context) . f(center)) / sum_t exp(f'(t) . f(center)).
double softmax_prob(const EmbeddingMatrix& embedding, NodeIndex context, NodeIndex center);
double log_partition(const EmbeddingMatrix& embedding, NodeIndex center);

// Exact log-likelihood of every (center, context) pair in the corpus under
// the full softmax. Quadratic in node count; meant for tiny graphs.
double full_softmax_objective(const EmbeddingMatrix& embedding, const WalkCorpus& corpus, std::uint32_t window);

// -log s(f'(ctx).f(ctr)) - sum_neg log s(-f'(neg).f(ctr))
double sgns_loss(const EmbeddingMatrix& embedding, NodeIndex center, NodeIndex context,
                 std::span<const NodeIndex> negatives);

struct SgnsGradient {
  std::vector<double> center;
  std::vector<double> context;
  std::vector<std::vector<double>> negatives;
};

// Gradient of sgns_loss, one block per slot (slots are treated as distinct
// parameters even if node ids repeat).
SgnsGradient sgns_gradient(const EmbeddingMatrix& embedding, NodeIndex center, NodeIndex context,
                           std::span<const NodeIndex> negatives);

// One SGD step on the pair; returns the loss before the update.
double sgns_pair_step(EmbeddingMatrix& embedding, NodeIndex center, NodeIndex context,
                      std::span<const NodeIndex> negatives, double step_size);

struct TrainResult {
  EmbeddingMatrix embedding;
  std::vector<double> epoch_mean_loss;
};

// Throws ConfigError for an empty corpus or invalid config.
TrainResult train(const WalkCorpus& corpus, std::size_t node_count, const EmbedConfig& config);

// Header `N d`, then `<node-id> <f1> ... <fd>` with 6 significant digits.
void write_embeddings(std::ostream& out, const EmbeddingMatrix& embedding, std::span<const std::string> ids);
// Rows are placed by graph index; every graph node must be present.
EmbeddingMatrix read_embeddings(std::istream& in, const SpamGraph& graph, const std::string& source = "embeddings");

}  // namespace enwalk
