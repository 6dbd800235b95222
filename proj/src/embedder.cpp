#include "enwalk/embedder.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "enwalk/errors.hpp"

namespace enwalk {

namespace {

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Eight independent partial sums so the reduction vectorizes; the summation
// order is fixed, so results stay reproducible.
double dot(std::span<const double> a, std::span<const double> b) {
  double acc[8] = {};
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t k = 0; k < 8; ++k) acc[k] += a[i + k] * b[i + k];
  }
  double s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double step_loss(EmbeddingMatrix& emb, NodeIndex center, NodeIndex target, double label, double step,
                 std::span<double> grad_center) {
  const auto f = emb.input(center);
  const auto out = emb.output(target);
  const double x = dot(f, out);
  // One exp serves both the sigmoid and the log-loss.
  const double e = std::exp(-std::abs(x));
  const double sig = x >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  const double soft = std::log1p(e);
  // -log s(x) for the positive, -log s(-x) for a negative sample.
  const double loss = label > 0.5 ? (x >= 0.0 ? soft : soft - x) : (x >= 0.0 ? soft + x : soft);
  const double g = sig - label;
  const double scale = step * g;
  // Input and output rows live in different matrices, and the gradient
  // buffer is scratch, so the three never alias.
  const double* __restrict fp = f.data();
  double* __restrict op = out.data();
  double* __restrict gp = grad_center.data();
  const std::size_t d = f.size();
  for (std::size_t i = 0; i < d; ++i) {
    gp[i] += g * op[i];
    op[i] -= scale * fp[i];
  }
  return loss;
}

double pair_step(EmbeddingMatrix& emb, NodeIndex center, NodeIndex context, std::span<const NodeIndex> negatives,
                 double step, std::span<double> grad_center) {
  std::fill(grad_center.begin(), grad_center.end(), 0.0);
  double loss = step_loss(emb, center, context, 1.0, step, grad_center);
  for (NodeIndex neg : negatives) loss += step_loss(emb, center, neg, 0.0, step, grad_center);
  const auto f = emb.input(center);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] -= step * grad_center[i];
  return loss;
}

}  // namespace

void EmbedConfig::validate() const {
  if (dimension < 1) throw ConfigError("dimension must be >= 1");
  if (window < 1) throw ConfigError("window must be >= 1");
  if (negatives < 1) throw ConfigError("negatives must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!std::isfinite(learning_rate) || learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (!std::isfinite(noise_exponent)) throw ConfigError("noise exponent must be finite");
  if (workers < 1) throw ConfigError("worker count must be >= 1");
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t dimension)
    : rows_(rows), dim_(dimension), input_(rows * dimension, 0.0), output_(rows * dimension, 0.0) {}

bool EmbeddingMatrix::all_finite() const {
  auto finite = [](double x) { return std::isfinite(x); };
  return std::all_of(input_.begin(), input_.end(), finite) && std::all_of(output_.begin(), output_.end(), finite);
}

std::uint64_t count_contexts(const WalkCorpus& corpus, std::uint32_t window) {
  std::uint64_t total = 0;
  for (const Walk& walk : corpus.walks) {
    const std::uint64_t len = walk.size();
    for (std::uint64_t i = 0; i < len; ++i) {
      total += std::min<std::uint64_t>(i, window) + std::min<std::uint64_t>(len - 1 - i, window);
    }
  }
  return total;
}

// --- noise distribution -------------------------------------------------------

NoiseDistribution::NoiseDistribution(const WalkCorpus& corpus, std::size_t node_count, double exponent)
    : probs_(node_count, 0.0), accept_(node_count, 1.0), alias_(node_count) {
  std::vector<std::uint64_t> freq(node_count, 0);
  for (const Walk& walk : corpus.walks) {
    for (NodeIndex v : walk) ++freq.at(v);
  }
  double total = 0.0;
  for (std::size_t v = 0; v < node_count; ++v) {
    if (freq[v]) probs_[v] = std::pow(static_cast<double>(freq[v]), exponent);
    total += probs_[v];
  }
  if (total <= 0.0) throw ConfigError("noise distribution over an empty corpus");
  for (double& p : probs_) p /= total;

  // Vose's alias construction.
  const double n = static_cast<double>(node_count);
  std::vector<double> scaled(node_count);
  std::vector<NodeIndex> small, large;
  for (std::size_t v = 0; v < node_count; ++v) {
    alias_[v] = static_cast<NodeIndex>(v);
    scaled[v] = probs_[v] * n;
    (scaled[v] < 1.0 ? small : large).push_back(static_cast<NodeIndex>(v));
  }
  while (!small.empty() && !large.empty()) {
    const NodeIndex s = small.back();
    small.pop_back();
    const NodeIndex l = large.back();
    accept_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] -= 1.0 - scaled[s];
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding; a zero-mass leftover must never accept.
  for (NodeIndex v : large) accept_[v] = 1.0;
  for (NodeIndex v : small) accept_[v] = probs_[v] > 0.0 ? 1.0 : 0.0;
}

NodeIndex NoiseDistribution::sample(Rng& rng) const {
  while (true) {
    const auto v = static_cast<NodeIndex>(rng.below(probs_.size()));
    if (rng.uniform() < accept_[v]) return v;
    if (alias_[v] != v) return alias_[v];
  }
}

// --- exact softmax ------------------------------------------------------------

double log_partition(const EmbeddingMatrix& embedding, NodeIndex center) {
  const auto f = embedding.input(center);
  std::vector<double> scores(embedding.rows());
  double hi = -std::numeric_limits<double>::infinity();
  for (NodeIndex t = 0; t < embedding.rows(); ++t) {
    scores[t] = dot(embedding.output(t), f);
    hi = std::max(hi, scores[t]);
  }
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - hi);
  return hi + std::log(sum);
}

double softmax_prob(const EmbeddingMatrix& embedding, NodeIndex context, NodeIndex center) {
  const double score = dot(embedding.output(context), embedding.input(center));
  return std::exp(score - log_partition(embedding, center));
}

double full_softmax_objective(const EmbeddingMatrix& embedding, const WalkCorpus& corpus, std::uint32_t window) {
  std::vector<double> log_z(embedding.rows());
  for (NodeIndex u = 0; u < embedding.rows(); ++u) log_z[u] = log_partition(embedding, u);
  double objective = 0.0;
  for_each_context(corpus, window, [&](NodeIndex center, NodeIndex context) {
    objective += dot(embedding.output(context), embedding.input(center)) - log_z[center];
  });
  return objective;
}

// --- SGNS ---------------------------------------------------------------------

double sgns_loss(const EmbeddingMatrix& embedding, NodeIndex center, NodeIndex context,
                 std::span<const NodeIndex> negatives) {
  const auto f = embedding.input(center);
  double loss = -log_sigmoid(dot(embedding.output(context), f));
  for (NodeIndex neg : negatives) loss -= log_sigmoid(-dot(embedding.output(neg), f));
  return loss;
}

SgnsGradient sgns_gradient(const EmbeddingMatrix& embedding, NodeIndex center, NodeIndex context,
                           std::span<const NodeIndex> negatives) {
  const auto f = embedding.input(center);
  const std::size_t d = f.size();
  SgnsGradient grad;
  grad.center.assign(d, 0.0);

  auto block = [&](NodeIndex target, double label) {
    const auto out = embedding.output(target);
    const double g = sigmoid(dot(out, f)) - label;
    std::vector<double> g_out(d);
    for (std::size_t i = 0; i < d; ++i) {
      grad.center[i] += g * out[i];
      g_out[i] = g * f[i];
    }
    return g_out;
  };
  grad.context = block(context, 1.0);
  for (NodeIndex neg : negatives) grad.negatives.push_back(block(neg, 0.0));
  return grad;
}

double sgns_pair_step(EmbeddingMatrix& embedding, NodeIndex center, NodeIndex context,
                      std::span<const NodeIndex> negatives, double step_size) {
  std::vector<double> grad_center(embedding.dimension());
  return pair_step(embedding, center, context, negatives, step_size, grad_center);
}

TrainResult train(const WalkCorpus& corpus, std::size_t node_count, const EmbedConfig& config) {
  config.validate();
  if (corpus.walks.empty() || corpus.token_count() == 0) throw ConfigError("cannot train on an empty corpus");

  TrainResult result{EmbeddingMatrix(node_count, config.dimension), {}};
  EmbeddingMatrix& emb = result.embedding;
  {
    Rng init(derive_seed(config.seed, {0x696e6974ULL}));
    const double half = 0.5 / config.dimension;
    for (NodeIndex v = 0; v < node_count; ++v) {
      for (double& x : emb.input(v)) x = init.uniform(-half, half);
    }
  }

  const NoiseDistribution noise(corpus, node_count, config.noise_exponent);
  const std::uint64_t pairs_per_epoch = count_contexts(corpus, config.window);
  const double total_pairs = static_cast<double>(pairs_per_epoch) * config.epochs;
  const double floor_rate = config.learning_rate * 1e-4;
  const unsigned workers = config.deterministic ? 1u : config.workers;

  std::atomic<std::uint64_t> processed{0};
  auto rate_at = [&](std::uint64_t done) {
    if (total_pairs <= 0.0) return config.learning_rate;
    return std::max(floor_rate, config.learning_rate * (1.0 - static_cast<double>(done) / total_pairs));
  };

  // Trains walks [begin, end) and returns the summed loss.
  auto run = [&](std::uint32_t epoch, unsigned worker, std::size_t begin, std::size_t end) {
    Rng rng(derive_seed(config.seed, {0x6e6567ULL, epoch, worker}));
    std::vector<double> grad(config.dimension);
    std::vector<NodeIndex> negs;
    negs.reserve(config.negatives);
    double loss = 0.0;
    std::uint64_t local = 0;
    for (std::size_t w = begin; w < end; ++w) {
      const Walk& walk = corpus.walks[w];
      const std::size_t len = walk.size();
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t lo = i > config.window ? i - config.window : 0;
        const std::size_t hi = std::min(len - 1, i + config.window);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const NodeIndex center = walk[i];
          const NodeIndex context = walk[j];
          negs.clear();
          for (std::uint32_t k = 0; k < config.negatives; ++k) {
            const NodeIndex neg = noise.sample(rng);
            if (neg != context) negs.push_back(neg);
          }
          const std::uint64_t done = workers == 1 ? processed.load(std::memory_order_relaxed) + local
                                                  : processed.fetch_add(1, std::memory_order_relaxed);
          loss += pair_step(emb, center, context, negs, rate_at(done), grad);
          ++local;
        }
      }
    }
    if (workers == 1) processed.fetch_add(local, std::memory_order_relaxed);
    return loss;
  };

  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    if (workers == 1) {
      epoch_loss = run(epoch, 0, 0, corpus.walks.size());
    } else {
      // Lock-free shared updates; only finiteness is promised here.
      std::vector<double> losses(workers, 0.0);
      {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (corpus.walks.size() + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
          const std::size_t begin = std::min(corpus.walks.size(), w * chunk);
          const std::size_t end = std::min(corpus.walks.size(), begin + chunk);
          pool.emplace_back([&, w, begin, end] { losses[w] = run(epoch, w, begin, end); });
        }
      }
      for (double l : losses) epoch_loss += l;
    }
    result.epoch_mean_loss.push_back(pairs_per_epoch ? epoch_loss / static_cast<double>(pairs_per_epoch) : 0.0);
  }
  return result;
}

// --- I/O ----------------------------------------------------------------------

void write_embeddings(std::ostream& out, const EmbeddingMatrix& embedding, std::span<const std::string> ids) {
  if (ids.size() != embedding.rows()) throw ValidationError("id count does not match embedding rows");
  out << embedding.rows() << ' ' << embedding.dimension() << '\n';
  char buf[32];
  for (NodeIndex v = 0; v < embedding.rows(); ++v) {
    out << ids[v];
    for (double x : embedding.input(v)) {
      std::snprintf(buf, sizeof buf, " %.6g", x);
      out << buf;
    }
    out << '\n';
  }
}

EmbeddingMatrix read_embeddings(std::istream& in, const SpamGraph& graph, const std::string& source) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(source, line_no, "missing header");
  std::size_t rows = 0, dim = 0;
  {
    std::istringstream header(line);
    if (!(header >> rows >> dim) || dim == 0) throw ParseError(source, line_no, "header must be `N d`");
  }
  if (rows != graph.node_count()) {
    throw ValidationError(source + ": embedding has " + std::to_string(rows) + " rows, graph has " +
                          std::to_string(graph.node_count()) + " nodes");
  }
  EmbeddingMatrix emb(rows, dim);
  std::vector<std::uint8_t> seen(rows, 0);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id;
    fields >> id;
    const auto v = graph.find(id);
    if (!v) throw ParseError(source, line_no, "unknown node id '" + id + "'");
    if (seen[*v]) throw ParseError(source, line_no, "duplicate node id '" + id + "'");
    seen[*v] = 1;
    for (double& x : emb.input(*v)) {
      if (!(fields >> x) || !std::isfinite(x)) throw ParseError(source, line_no, "expected " + std::to_string(dim) + " values");
    }
    std::string extra;
    if (fields >> extra) throw ParseError(source, line_no, "too many values");
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw ValidationError(source + ": missing node rows");
  return emb;
}

}  // namespace enwalk
