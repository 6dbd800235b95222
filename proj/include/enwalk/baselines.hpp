#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "enwalk/graph.hpp"

namespace enwalk {

// --- trust regression ---------------------------------------------------------

// Linear trustworthiness score over the eight trust features; predictions
// are clamped to [0,1] and values near 0 mean "likely spammer".
struct TrustModel {
  std::array<double, kTrustFeatureCount> weights{};
  double intercept = 0.0;

  double raw(const TrustFeatures& features) const;
  double predict(const TrustFeatures& features) const;
};

struct TrustSample {
  TrustFeatures features{};
  double score = 0.0;
};

struct TrustFit {
  TrustModel model;
  // Set when the design was rank deficient and a ridge penalty was added.
  bool ridge_fallback = false;
};

// Least squares on standardized features. Needs two distinct examples.
TrustFit fit_trust(std::span<const TrustSample> samples);

std::vector<double> trust_scores(const SpamGraph& graph, const TrustModel& model);

// Stand-in for hand-labelled trust scores: up to `per_class` suspended and
// non-suspended users, scored in [0, 0.3) and [0.7, 1.0) respectively.
std::vector<TrustSample> synthetic_trust_labels(const SpamGraph& graph, const Labels& labels,
                                                std::size_t per_class, std::uint64_t seed);

void write_trust_model(std::ostream& out, const TrustModel& model);
TrustModel read_trust_model(std::istream& in, const std::string& source = "trust model");

// --- PageRank -----------------------------------------------------------------

enum class PageRankVariant { kTraditional, kTrust };

struct PageRankConfig {
  // Mass given to the prior each step: PR = (1 - teleport) M PR + teleport p.
  double teleport = 0.15;
  double tolerance = 1e-12;
  std::uint32_t max_iterations = 1000;
  PageRankVariant variant = PageRankVariant::kTraditional;

  void validate() const;
};

struct PageRankResult {
  std::vector<double> rank;
  std::uint32_t iterations = 0;
  bool converged = false;
};

// Power iteration over out-edges; dangling mass follows the prior. The trust
// variant scales every transition u->v by trust[v] (rows renormalized) and
// uses the normalized trust vector as prior.
PageRankResult pagerank(const SpamGraph& graph, const PageRankConfig& config, std::span<const double> trust = {});

// Higher = more spammy: 1 - rank / max(rank).
std::vector<double> pagerank_spamicity(std::span<const double> rank);

// --- MRF / loopy belief propagation -------------------------------------------

inline constexpr std::size_t kStates = 3;  // Spammer, Mixed, Non-spammer
using StateVector = std::array<double, kStates>;
using Potential = std::array<StateVector, kStates>;

// Rows: neighbor state, columns: node state. Columns sum to one.
inline constexpr Potential kPropagationTable{{
    {0.80, 0.40, 0.025},
    {0.15, 0.50, 0.125},
    {0.05, 0.10, 0.850},
}};

Potential symmetrize(const Potential& psi);

struct MRFConfig {
  Potential propagation = kPropagationTable;
  // Weight kept on the previous message when updating.
  double damping = 0.5;
  double tolerance = 1e-10;
  std::uint32_t max_iterations = 1000;

  void validate() const;
};

// (1 - f, min(f, 1 - f), f), normalized.
StateVector trust_prior(double trust);

struct LbpResult {
  std::vector<StateVector> beliefs;
  std::uint32_t iterations = 0;
  bool converged = false;
};

// Sum-product on the undirected view with the symmetrized propagation table
// as pairwise potential. Synchronous updates.
LbpResult lbp_marginals(const SpamGraph& graph, const MRFConfig& config, std::span<const StateVector> priors);
LbpResult lbp_marginals_from_trust(const SpamGraph& graph, const MRFConfig& config, std::span<const double> trust);

}  // namespace enwalk
