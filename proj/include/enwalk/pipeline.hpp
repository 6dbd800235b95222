#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "enwalk/baselines.hpp"
#include "enwalk/dynamics.hpp"
#include "enwalk/embedder.hpp"
#include "enwalk/evaluator.hpp"
#include "enwalk/walker.hpp"

namespace enwalk {

// Model names in report order.
inline const std::vector<std::string> kAllModels{"PR-T", "PR-TITP", "MRF", "DeepWalk", "node2vec", "ENWalk"};

struct PipelineConfig {
  // Strategy is overridden per embedding model.
  WalkConfig walk;
  BiasWeights bias;
  ReturnInOutStrategy return_inout{1.0, 0.5};
  EmbedConfig embed;
  PageRankConfig pagerank;
  MRFConfig mrf;
  std::size_t trust_labels_per_class = 400;
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  std::vector<std::size_t> precision_n{100};
  std::vector<std::string> models = kAllModels;
};

struct EmbeddingRun {
  WalkCorpus corpus;
  TrainResult trained;
};

EmbeddingRun run_embedding(const SpamGraph& graph, const DynamicsTable* dynamics, const WalkConfig& walk,
                           const EmbedConfig& embed);

FeatureView feature_view(const EmbeddingMatrix& embedding);

// Out-of-fold logistic scores on the embedding rows.
ScoreTable embedding_scores(const SpamGraph& graph, const EmbeddingMatrix& embedding, const Labels& labels,
                            std::size_t folds, std::uint64_t seed);

struct PipelineResult {
  std::vector<NamedScores> scores;
  ComparisonReport report;
  // Classification cross-validation for embedding models.
  std::map<std::string, CrossValidationReport> classification;
  std::map<std::string, EmbeddingRun> embeddings;
  std::optional<TrustFit> trust;
};

PipelineResult run_pipeline(const SpamGraph& graph, const Labels& labels, const PipelineConfig& config);

// report.json content: ranking rows plus classification metrics.
std::string pipeline_json(const PipelineResult& result);

}  // namespace enwalk
