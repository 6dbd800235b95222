#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "enwalk/graph.hpp"

namespace enwalk {

// node -> spamicity, aligned with graph indices. Higher = more likely spam.
struct ScoreTable {
  std::vector<std::string> ids;
  std::vector<double> scores;

  static ScoreTable from_graph(const SpamGraph& graph, std::vector<double> scores);
  std::size_t size() const noexcept { return scores.size(); }
  // Throws ValidationError on size mismatch, duplicate ids or non-finite scores.
  void validate() const;
};

void write_scores_tsv(std::ostream& out, const ScoreTable& table);
// Rows are reordered to graph index order; every node must be scored once.
ScoreTable read_scores_tsv(std::istream& in, const SpamGraph& graph, const std::string& source = "scores");

// Dense row-major view over feature rows.
struct FeatureView {
  std::span<const double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const double> row(std::size_t i) const { return data.subspan(i * cols, cols); }
};

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;

  double logit(std::span<const double> x) const;
  double probability(std::span<const double> x) const;
};

inline constexpr double kDefaultL2 = 1e-3;

// Mean logistic loss + (l2 / 2) |w|^2; the bias is not penalized.
double logistic_objective(const LogisticModel& model, const FeatureView& x, std::span<const std::uint8_t> y,
                          double l2 = kDefaultL2);
// Gradient w.r.t. (weights..., bias).
std::vector<double> logistic_gradient(const LogisticModel& model, const FeatureView& x,
                                      std::span<const std::uint8_t> y, double l2 = kDefaultL2);

// Damped Newton iterations on the regularized loss. Needs both classes.
LogisticModel train_logistic(const FeatureView& x, std::span<const std::uint8_t> y, double l2 = kDefaultL2);

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

ClassificationMetrics classification_metrics(std::span<const std::uint8_t> truth,
                                             std::span<const std::uint8_t> predicted);

struct CrossValidationReport {
  ClassificationMetrics mean;
  std::vector<ClassificationMetrics> folds;
  std::size_t positives = 0;
  std::uint64_t seed = 0;
};

// Balances classes by subsampling negatives to the positive count, splits
// into stratified folds and averages P/R/F/A at threshold 0.5.
CrossValidationReport cross_validate(const FeatureView& x, std::span<const std::uint8_t> y, std::size_t folds,
                                     std::uint64_t seed);

// Same protocol over a caller-supplied fold assignment (row indices).
CrossValidationReport cross_validate_folds(const FeatureView& x, std::span<const std::uint8_t> y,
                                           const std::vector<std::vector<std::size_t>>& folds);

// Out-of-fold logistic probabilities for every row, usable as a ranking.
std::vector<double> out_of_fold_scores(const FeatureView& x, std::span<const std::uint8_t> y, std::size_t folds,
                                       std::uint64_t seed);

inline constexpr std::size_t kCdfPoints = 100;

struct CdfResult {
  // cdf[i] is the fraction of suspended users inside the top (i+1)% of the
  // ranking; a node straddling the cut counts in proportion.
  std::array<double, kCdfPoints> cdf{};
  double auc = 0.0;
};

// Descending score, ties broken by node id.
std::vector<std::size_t> ranking(const ScoreTable& scores);

CdfResult suspended_cdf(const ScoreTable& scores, std::span<const std::uint8_t> labels);
double precision_at_n(const ScoreTable& scores, std::span<const std::uint8_t> labels, std::size_t n);

struct NamedScores {
  std::string name;
  ScoreTable scores;
};

struct ModelRow {
  std::string name;
  double auc = 0.0;
  std::vector<std::pair<std::size_t, double>> precision_at;
  CdfResult cdf;
};

struct ComparisonReport {
  std::vector<ModelRow> rows;
};

ComparisonReport compare_models(std::span<const NamedScores> models, std::span<const std::uint8_t> labels,
                                std::span<const std::size_t> n_values);

std::string comparison_json(const ComparisonReport& report);
void write_cdf_tsv(std::ostream& out, const ComparisonReport& report);
void print_comparison_table(std::ostream& out, const ComparisonReport& report);

}  // namespace enwalk
