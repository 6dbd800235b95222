#include "enwalk/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "enwalk/errors.hpp"
#include "enwalk/rng.hpp"
#include "json.hpp"

namespace enwalk {

namespace {

constexpr std::size_t kP = kTrustFeatureCount;
using Square = std::array<std::array<double, kP>, kP>;

// In-place Cholesky; false when a pivot is not safely positive.
bool cholesky(Square& a, double pivot_floor) {
  for (std::size_t j = 0; j < kP; ++j) {
    double d = a[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j][k] * a[j][k];
    if (!(d > pivot_floor)) return false;
    a[j][j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < kP; ++i) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
      a[i][j] = s / a[j][j];
    }
  }
  return true;
}

std::array<double, kP> cholesky_solve(const Square& l, std::array<double, kP> b) {
  for (std::size_t i = 0; i < kP; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= l[i][k] * b[k];
    b[i] /= l[i][i];
  }
  for (std::size_t i = kP; i-- > 0;) {
    for (std::size_t k = i + 1; k < kP; ++k) b[i] -= l[k][i] * b[k];
    b[i] /= l[i][i];
  }
  return b;
}

}  // namespace

// --- trust --------------------------------------------------------------------

double TrustModel::raw(const TrustFeatures& features) const {
  double s = intercept;
  for (std::size_t i = 0; i < kP; ++i) s += weights[i] * features[i];
  return s;
}

double TrustModel::predict(const TrustFeatures& features) const {
  const double r = raw(features);
  return std::isfinite(r) ? std::clamp(r, 0.0, 1.0) : 0.0;
}

TrustFit fit_trust(std::span<const TrustSample> samples) {
  if (samples.size() < 2) throw ConfigError("trust fit needs at least two labelled examples");
  const bool distinct = std::any_of(samples.begin() + 1, samples.end(), [&](const TrustSample& s) {
    return s.features != samples.front().features || s.score != samples.front().score;
  });
  if (!distinct) throw ConfigError("trust fit needs at least two distinct labelled examples");

  const double n = static_cast<double>(samples.size());
  std::array<double, kP> mean{}, scale{};
  double y_mean = 0.0;
  for (const TrustSample& s : samples) {
    for (std::size_t i = 0; i < kP; ++i) mean[i] += s.features[i] / n;
    y_mean += s.score / n;
  }
  for (const TrustSample& s : samples) {
    for (std::size_t i = 0; i < kP; ++i) scale[i] += (s.features[i] - mean[i]) * (s.features[i] - mean[i]) / n;
  }
  for (double& sc : scale) sc = sc > 0.0 ? std::sqrt(sc) : 1.0;

  Square gram{};
  std::array<double, kP> rhs{};
  for (const TrustSample& s : samples) {
    std::array<double, kP> z;
    for (std::size_t i = 0; i < kP; ++i) z[i] = (s.features[i] - mean[i]) / scale[i];
    for (std::size_t i = 0; i < kP; ++i) {
      rhs[i] += z[i] * (s.score - y_mean);
      for (std::size_t j = 0; j < kP; ++j) gram[i][j] += z[i] * z[j];
    }
  }

  TrustFit fit;
  Square factor = gram;
  if (!cholesky(factor, 1e-10 * n)) {
    fit.ridge_fallback = true;
    factor = gram;
    for (std::size_t i = 0; i < kP; ++i) factor[i][i] += 1e-6 * n;
    if (!cholesky(factor, 0.0)) throw ValidationError("trust regression is singular even with ridge");
  }
  const auto beta = cholesky_solve(factor, rhs);

  // Fold the standardization back into raw-feature weights.
  fit.model.intercept = y_mean;
  for (std::size_t i = 0; i < kP; ++i) {
    fit.model.weights[i] = beta[i] / scale[i];
    fit.model.intercept -= fit.model.weights[i] * mean[i];
  }
  return fit;
}

std::vector<double> trust_scores(const SpamGraph& graph, const TrustModel& model) {
  std::vector<double> out(graph.node_count());
  for (NodeIndex v = 0; v < graph.node_count(); ++v) out[v] = model.predict(graph.record(v).trust_features);
  return out;
}

std::vector<TrustSample> synthetic_trust_labels(const SpamGraph& graph, const Labels& labels,
                                                std::size_t per_class, std::uint64_t seed) {
  if (labels.size() != graph.node_count()) throw ValidationError("label count does not match node count");
  std::vector<NodeIndex> pos, neg;
  for (NodeIndex v = 0; v < graph.node_count(); ++v) (labels[v] ? pos : neg).push_back(v);
  Rng rng(derive_seed(seed, {0x7472757374ULL}));
  shuffle(pos, rng);
  shuffle(neg, rng);
  pos.resize(std::min(pos.size(), per_class));
  neg.resize(std::min(neg.size(), per_class));

  std::vector<TrustSample> samples;
  for (NodeIndex v : pos) samples.push_back({graph.record(v).trust_features, rng.uniform(0.0, 0.3)});
  for (NodeIndex v : neg) samples.push_back({graph.record(v).trust_features, rng.uniform(0.7, 1.0)});
  return samples;
}

void write_trust_model(std::ostream& out, const TrustModel& model) {
  nlohmann::json j;
  j["weights"] = model.weights;
  j["intercept"] = model.intercept;
  out << j.dump(2) << '\n';
}

TrustModel read_trust_model(std::istream& in, const std::string& source) {
  TrustModel model;
  try {
    const auto j = nlohmann::json::parse(in);
    const auto& w = j.at("weights");
    if (!w.is_array() || w.size() != kP) throw ParseError(source, 1, "'weights' must hold 8 numbers");
    for (std::size_t i = 0; i < kP; ++i) model.weights[i] = w[i].get<double>();
    model.intercept = j.at("intercept").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source, 1, e.what());
  }
  return model;
}

// --- PageRank -----------------------------------------------------------------

void PageRankConfig::validate() const {
  if (!(teleport > 0.0 && teleport < 1.0)) throw ConfigError("teleport must lie in (0,1)");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (max_iterations < 1) throw ConfigError("max iterations must be >= 1");
}

PageRankResult pagerank(const SpamGraph& graph, const PageRankConfig& config, std::span<const double> trust) {
  config.validate();
  const std::size_t n = graph.node_count();
  if (n == 0) throw ValidationError("PageRank on an empty graph");
  const bool use_trust = config.variant == PageRankVariant::kTrust;
  if (use_trust && trust.size() != n) throw ConfigError("trust PageRank needs one trust score per node");

  std::vector<double> prior(n, 1.0 / static_cast<double>(n));
  if (use_trust) {
    double total = 0.0;
    for (double t : trust) {
      if (!std::isfinite(t) || t < 0.0) throw ValidationError("trust scores must be finite and non-negative");
      total += t;
    }
    if (total > 0.0) {
      for (std::size_t v = 0; v < n; ++v) prior[v] = trust[v] / total;
    }
  }
  auto edge_weight = [&](const Neighbor& nb) { return use_trust ? nb.weight * trust[nb.node] : nb.weight; };

  std::vector<double> out_mass(n, 0.0);
  for (NodeIndex u = 0; u < n; ++u) {
    for (const Neighbor& nb : graph.out_neighbors(u)) out_mass[u] += edge_weight(nb);
  }

  PageRankResult result;
  std::vector<double> rank(prior);
  std::vector<double> next(n);
  const double follow = 1.0 - config.teleport;
  for (std::uint32_t it = 1; it <= config.max_iterations; ++it) {
    double dangling = 0.0;
    std::fill(next.begin(), next.end(), 0.0);
    for (NodeIndex u = 0; u < n; ++u) {
      if (out_mass[u] <= 0.0) {
        dangling += rank[u];
        continue;
      }
      const double share = rank[u] / out_mass[u];
      for (const Neighbor& nb : graph.out_neighbors(u)) next[nb.node] += share * edge_weight(nb);
    }
    double total = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      next[v] = follow * (next[v] + dangling * prior[v]) + config.teleport * prior[v];
      total += next[v];
    }
    double change = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      next[v] /= total;
      change += std::abs(next[v] - rank[v]);
    }
    rank.swap(next);
    result.iterations = it;
    if (change < config.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.rank = std::move(rank);
  return result;
}

std::vector<double> pagerank_spamicity(std::span<const double> rank) {
  const double top = rank.empty() ? 0.0 : *std::max_element(rank.begin(), rank.end());
  std::vector<double> out(rank.size(), 0.0);
  if (top <= 0.0) return out;
  for (std::size_t v = 0; v < rank.size(); ++v) out[v] = 1.0 - rank[v] / top;
  return out;
}

// --- MRF ----------------------------------------------------------------------

Potential symmetrize(const Potential& psi) {
  Potential out{};
  for (std::size_t i = 0; i < kStates; ++i) {
    for (std::size_t j = 0; j < kStates; ++j) out[i][j] = 0.5 * (psi[i][j] + psi[j][i]);
  }
  return out;
}

void MRFConfig::validate() const {
  for (std::size_t col = 0; col < kStates; ++col) {
    double sum = 0.0;
    for (std::size_t row = 0; row < kStates; ++row) {
      if (!(propagation[row][col] > 0.0) || !std::isfinite(propagation[row][col])) {
        throw ConfigError("propagation entries must be positive");
      }
      sum += propagation[row][col];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("propagation columns must sum to 1");
  }
  if (!(damping >= 0.0 && damping < 1.0)) throw ConfigError("damping must lie in [0,1)");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (max_iterations < 1) throw ConfigError("max iterations must be >= 1");
}

StateVector trust_prior(double trust) {
  const double f = std::clamp(trust, 0.0, 1.0);
  StateVector p{1.0 - f, std::min(f, 1.0 - f), f};
  const double total = p[0] + p[1] + p[2];
  for (double& x : p) x /= total;
  return p;
}

LbpResult lbp_marginals(const SpamGraph& graph, const MRFConfig& config, std::span<const StateVector> priors) {
  config.validate();
  const std::size_t n = graph.node_count();
  if (priors.size() != n) throw ConfigError("one prior per node required");
  for (const StateVector& p : priors) {
    double s = 0.0;
    for (double x : p) {
      if (!std::isfinite(x) || x < 0.0) throw ValidationError("priors must be non-negative");
      s += x;
    }
    if (!(s > 0.0)) throw ValidationError("prior with zero mass");
  }
  const Potential psi = symmetrize(config.propagation);

  // Undirected simple edges; message 2e runs a->b, 2e+1 runs b->a.
  std::vector<std::pair<NodeIndex, NodeIndex>> edges;
  for (const Edge& e : graph.edges()) edges.emplace_back(std::min(e.src, e.dst), std::max(e.src, e.dst));
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  struct Incoming {
    std::size_t message;  // neighbor -> this node
    std::size_t reverse;  // this node -> neighbor
  };
  std::vector<std::vector<Incoming>> incoming(n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    incoming[edges[e].second].push_back({2 * e, 2 * e + 1});
    incoming[edges[e].first].push_back({2 * e + 1, 2 * e});
  }

  std::vector<StateVector> log_prior(n);
  for (std::size_t v = 0; v < n; ++v) {
    const double s = priors[v][0] + priors[v][1] + priors[v][2];
    for (std::size_t k = 0; k < kStates; ++k) log_prior[v][k] = std::log(priors[v][k] / s);
  }

  const StateVector uniform{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::vector<StateVector> msg(2 * edges.size(), uniform);
  std::vector<StateVector> fresh(msg.size());

  // Log of prior times all incoming messages.
  auto gather = [&](NodeIndex v, const std::vector<StateVector>& m) {
    StateVector acc = log_prior[v];
    for (const Incoming& in : incoming[v]) {
      for (std::size_t k = 0; k < kStates; ++k) acc[k] += std::log(m[in.message][k]);
    }
    return acc;
  };

  LbpResult result;
  if (msg.empty()) {
    result.converged = true;
  }
  for (std::uint32_t it = 1; it <= config.max_iterations && !msg.empty(); ++it) {
    double change = 0.0;
    for (NodeIndex v = 0; v < n; ++v) {
      const StateVector total = gather(v, msg);
      for (const Incoming& in : incoming[v]) {
        StateVector h;
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < kStates; ++s) {
          h[s] = total[s] - std::log(msg[in.message][s]);
          hi = std::max(hi, h[s]);
        }
        for (double& x : h) x = std::exp(x - hi);
        StateVector out{};
        double z = 0.0;
        for (std::size_t t = 0; t < kStates; ++t) {
          for (std::size_t s = 0; s < kStates; ++s) out[t] += h[s] * psi[s][t];
          z += out[t];
        }
        StateVector& target = fresh[in.reverse];
        double zd = 0.0;
        for (std::size_t t = 0; t < kStates; ++t) {
          target[t] = (1.0 - config.damping) * (out[t] / z) + config.damping * msg[in.reverse][t];
          zd += target[t];
        }
        for (std::size_t t = 0; t < kStates; ++t) {
          target[t] /= zd;
          change = std::max(change, std::abs(target[t] - msg[in.reverse][t]));
        }
      }
    }
    msg.swap(fresh);
    result.iterations = it;
    if (change < config.tolerance) {
      result.converged = true;
      break;
    }
  }

  result.beliefs.resize(n);
  for (NodeIndex v = 0; v < n; ++v) {
    StateVector b = gather(v, msg);
    const double hi = std::max({b[0], b[1], b[2]});
    double z = 0.0;
    for (double& x : b) {
      x = std::exp(x - hi);
      z += x;
    }
    for (double& x : b) x /= z;
    result.beliefs[v] = b;
  }
  return result;
}

LbpResult lbp_marginals_from_trust(const SpamGraph& graph, const MRFConfig& config, std::span<const double> trust) {
  if (trust.size() != graph.node_count()) throw ConfigError("one trust score per node required");
  std::vector<StateVector> priors(trust.size());
  for (std::size_t v = 0; v < trust.size(); ++v) priors[v] = trust_prior(trust[v]);
  return lbp_marginals(graph, config, priors);
}

}  // namespace enwalk
