#include "enwalk/pipeline.hpp"

#include <algorithm>

#include "enwalk/errors.hpp"
#include "json.hpp"

namespace enwalk {

EmbeddingRun run_embedding(const SpamGraph& graph, const DynamicsTable* dynamics, const WalkConfig& walk,
                           const EmbedConfig& embed) {
  EmbeddingRun run;
  run.corpus = Walker(graph, walk, dynamics).generate_corpus();
  run.trained = train(run.corpus, graph.node_count(), embed);
  return run;
}

FeatureView feature_view(const EmbeddingMatrix& embedding) {
  return {embedding.features(), embedding.rows(), embedding.dimension()};
}

ScoreTable embedding_scores(const SpamGraph& graph, const EmbeddingMatrix& embedding, const Labels& labels,
                            std::size_t folds, std::uint64_t seed) {
  return ScoreTable::from_graph(graph, out_of_fold_scores(feature_view(embedding), labels, folds, seed));
}

PipelineResult run_pipeline(const SpamGraph& graph, const Labels& labels, const PipelineConfig& config) {
  if (labels.size() != graph.node_count()) throw ValidationError("label count does not match node count");
  for (const std::string& m : config.models) {
    if (std::find(kAllModels.begin(), kAllModels.end(), m) == kAllModels.end()) {
      throw ConfigError("unknown model '" + m + "'");
    }
  }
  auto wanted = [&](const std::string& m) {
    return std::find(config.models.begin(), config.models.end(), m) != config.models.end();
  };

  PipelineResult result;
  std::map<std::string, ScoreTable> tables;

  std::vector<double> trust;
  if (wanted("PR-TITP") || wanted("MRF")) {
    const auto samples = synthetic_trust_labels(graph, labels, config.trust_labels_per_class, config.seed);
    result.trust = fit_trust(samples);
    trust = trust_scores(graph, result.trust->model);
  }
  if (wanted("PR-T")) {
    PageRankConfig pr = config.pagerank;
    pr.variant = PageRankVariant::kTraditional;
    tables.emplace("PR-T", ScoreTable::from_graph(graph, pagerank_spamicity(pagerank(graph, pr).rank)));
  }
  if (wanted("PR-TITP")) {
    PageRankConfig pr = config.pagerank;
    pr.variant = PageRankVariant::kTrust;
    tables.emplace("PR-TITP", ScoreTable::from_graph(graph, pagerank_spamicity(pagerank(graph, pr, trust).rank)));
  }
  if (wanted("MRF")) {
    const LbpResult lbp = lbp_marginals_from_trust(graph, config.mrf, trust);
    std::vector<double> spam(graph.node_count());
    for (std::size_t v = 0; v < spam.size(); ++v) spam[v] = lbp.beliefs[v][0];
    tables.emplace("MRF", ScoreTable::from_graph(graph, std::move(spam)));
  }

  std::optional<DynamicsTable> dynamics;
  auto embed_model = [&](const std::string& name, WalkStrategy strategy) {
    WalkConfig walk = config.walk;
    walk.strategy = strategy;
    if (std::holds_alternative<EnwalkStrategy>(strategy) && !dynamics) dynamics.emplace(graph);
    EmbeddingRun run = run_embedding(graph, dynamics ? &*dynamics : nullptr, walk, config.embed);
    const FeatureView x = feature_view(run.trained.embedding);
    result.classification.emplace(name, cross_validate(x, labels, config.folds, config.seed));
    tables.emplace(name, embedding_scores(graph, run.trained.embedding, labels, config.folds, config.seed));
    result.embeddings.emplace(name, std::move(run));
  };
  if (wanted("DeepWalk")) embed_model("DeepWalk", UniformStrategy{});
  if (wanted("node2vec")) embed_model("node2vec", config.return_inout);
  if (wanted("ENWalk")) embed_model("ENWalk", EnwalkStrategy{config.bias});

  for (const std::string& m : kAllModels) {
    if (auto it = tables.find(m); it != tables.end()) result.scores.push_back({m, std::move(it->second)});
  }
  result.report = compare_models(result.scores, labels, config.precision_n);
  return result;
}

std::string pipeline_json(const PipelineResult& result) {
  auto root = nlohmann::ordered_json::parse(comparison_json(result.report));
  for (auto& row : root["models"]) {
    const auto it = result.classification.find(row["model"].get<std::string>());
    if (it == result.classification.end()) continue;
    const ClassificationMetrics& m = it->second.mean;
    row["classification"] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"accuracy", m.accuracy}};
  }
  return root.dump(2);
}

}  // namespace enwalk
