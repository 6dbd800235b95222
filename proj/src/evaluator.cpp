#include "enwalk/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include "enwalk/errors.hpp"
#include "enwalk/rng.hpp"
#include "json.hpp"

namespace enwalk {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Solves a dense symmetric positive definite system in place (Cholesky).
bool solve_spd(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) return false;
    d = std::sqrt(d);
    a[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / d;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= a[i * n + k] * b[k];
    b[i] /= a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) b[i] -= a[k * n + i] * b[k];
    b[i] /= a[i * n + i];
  }
  return true;
}

void check_labels(const FeatureView& x, std::span<const std::uint8_t> y) {
  if (y.size() != x.rows) throw ValidationError("label count does not match feature rows");
  if (x.data.size() != x.rows * x.cols) throw ValidationError("feature block has the wrong size");
}

struct Split {
  std::vector<std::vector<std::size_t>> folds;
};

// Round-robin assignment of shuffled positives and negatives.
Split stratified_folds(std::vector<std::size_t> pos, std::vector<std::size_t> neg, std::size_t k, Rng& rng) {
  shuffle(pos, rng);
  shuffle(neg, rng);
  Split split;
  split.folds.resize(k);
  for (std::size_t i = 0; i < pos.size(); ++i) split.folds[i % k].push_back(pos[i]);
  for (std::size_t i = 0; i < neg.size(); ++i) split.folds[(pos.size() + i) % k].push_back(neg[i]);
  return split;
}

struct Subset {
  std::vector<double> data;
  std::vector<std::uint8_t> labels;
  FeatureView view() const { return {data, labels.size(), labels.empty() ? 0 : data.size() / labels.size()}; }
};

Subset gather_rows(const FeatureView& x, std::span<const std::uint8_t> y, std::span<const std::size_t> rows) {
  Subset s;
  s.data.reserve(rows.size() * x.cols);
  for (std::size_t r : rows) {
    const auto src = x.row(r);
    s.data.insert(s.data.end(), src.begin(), src.end());
    s.labels.push_back(y[r]);
  }
  return s;
}

}  // namespace

// --- ScoreTable ---------------------------------------------------------------

ScoreTable ScoreTable::from_graph(const SpamGraph& graph, std::vector<double> scores) {
  if (scores.size() != graph.node_count()) throw ValidationError("score count does not match node count");
  ScoreTable t;
  t.ids.assign(graph.ids().begin(), graph.ids().end());
  t.scores = std::move(scores);
  return t;
}

void ScoreTable::validate() const {
  if (ids.size() != scores.size()) throw ValidationError("score table ids and scores differ in length");
  std::unordered_set<std::string_view> seen;
  for (const std::string& id : ids) {
    if (!seen.insert(id).second) throw ValidationError("node '" + id + "' scored twice");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("score table holds a non-finite score");
  }
}

void write_scores_tsv(std::ostream& out, const ScoreTable& table) {
  char buf[40];
  for (std::size_t i = 0; i < table.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", table.scores[i]);
    out << table.ids[i] << '\t' << buf << '\n';
  }
}

ScoreTable read_scores_tsv(std::istream& in, const SpamGraph& graph, const std::string& source) {
  std::vector<double> scores(graph.node_count(), 0.0);
  std::vector<std::uint8_t> seen(graph.node_count(), 0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(source, line_no, "expected node<TAB>score");
    const auto v = graph.find(std::string_view(line).substr(0, tab));
    if (!v) throw ParseError(source, line_no, "unknown node id");
    if (seen[*v]) throw ParseError(source, line_no, "node scored twice");
    seen[*v] = 1;
    try {
      std::size_t used = 0;
      const std::string value = line.substr(tab + 1);
      scores[*v] = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(source, line_no, "bad score");
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw ValidationError(source + ": score table does not cover every node");
  }
  ScoreTable t = ScoreTable::from_graph(graph, std::move(scores));
  t.validate();
  return t;
}

// --- logistic regression ------------------------------------------------------

double LogisticModel::logit(std::span<const double> x) const {
  double s = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * x[i];
  return s;
}

double LogisticModel::probability(std::span<const double> x) const { return sigmoid(logit(x)); }

double logistic_objective(const LogisticModel& model, const FeatureView& x, std::span<const std::uint8_t> y,
                          double l2) {
  check_labels(x, y);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double z = model.logit(x.row(i));
    loss += y[i] ? softplus(-z) : softplus(z);
  }
  double reg = 0.0;
  for (double w : model.weights) reg += w * w;
  return loss / static_cast<double>(x.rows) + 0.5 * l2 * reg;
}

std::vector<double> logistic_gradient(const LogisticModel& model, const FeatureView& x,
                                      std::span<const std::uint8_t> y, double l2) {
  check_labels(x, y);
  const std::size_t d = x.cols;
  std::vector<double> g(d + 1, 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto row = x.row(i);
    const double r = (sigmoid(model.logit(row)) - y[i]) * inv_n;
    for (std::size_t k = 0; k < d; ++k) g[k] += r * row[k];
    g[d] += r;
  }
  for (std::size_t k = 0; k < d; ++k) g[k] += l2 * model.weights[k];
  return g;
}

LogisticModel train_logistic(const FeatureView& x, std::span<const std::uint8_t> y, double l2) {
  check_labels(x, y);
  const std::size_t pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), std::uint8_t{1}));
  if (pos == 0 || pos == y.size()) throw ConfigError("logistic regression needs examples of both classes");
  if (!(l2 > 0.0)) throw ConfigError("L2 penalty must be positive");

  const std::size_t d = x.cols;
  const std::size_t p = d + 1;
  LogisticModel model;
  model.weights.assign(d, 0.0);
  const double prior = static_cast<double>(pos) / static_cast<double>(y.size());
  model.bias = std::log(prior / (1.0 - prior));

  const double inv_n = 1.0 / static_cast<double>(x.rows);
  double objective = logistic_objective(model, x, y, l2);
  std::vector<double> hess(p * p);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<double> grad = logistic_gradient(model, x, y, l2);
    double grad_norm = 0.0;
    for (double g : grad) grad_norm = std::max(grad_norm, std::abs(g));
    if (grad_norm < 1e-10) break;

    std::fill(hess.begin(), hess.end(), 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const auto row = x.row(i);
      const double s = sigmoid(model.logit(row));
      const double w = s * (1.0 - s) * inv_n;
      for (std::size_t a = 0; a < p; ++a) {
        const double xa = a < d ? row[a] : 1.0;
        for (std::size_t b = 0; b <= a; ++b) hess[a * p + b] += w * xa * (b < d ? row[b] : 1.0);
      }
    }
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = 0; b < a; ++b) hess[b * p + a] = hess[a * p + b];
    }
    for (std::size_t k = 0; k < d; ++k) hess[k * p + k] += l2;
    // The bias direction is unpenalized; a tiny jitter keeps it factorable.
    hess[d * p + d] += 1e-12;

    std::vector<double> step = grad;
    if (!solve_spd(hess, step, p)) step = grad;

    // Backtracking line search on the regularized objective.
    double t = 1.0;
    LogisticModel trial = model;
    bool improved = false;
    for (int ls = 0; ls < 50; ++ls) {
      for (std::size_t k = 0; k < d; ++k) trial.weights[k] = model.weights[k] - t * step[k];
      trial.bias = model.bias - t * step[d];
      const double value = logistic_objective(trial, x, y, l2);
      if (value <= objective) {
        improved = value < objective;
        objective = value;
        model = trial;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
  }
  return model;
}

ClassificationMetrics classification_metrics(std::span<const std::uint8_t> truth,
                                             std::span<const std::uint8_t> predicted) {
  if (truth.size() != predicted.size() || truth.empty()) throw ValidationError("metric inputs differ in length");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] && predicted[i]) ++tp;
    else if (!truth[i] && predicted[i]) ++fp;
    else if (truth[i] && !predicted[i]) ++fn;
    else ++tn;
  }
  ClassificationMetrics m;
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(truth.size());
  return m;
}

CrossValidationReport cross_validate(const FeatureView& x, std::span<const std::uint8_t> y, std::size_t folds,
                                     std::uint64_t seed) {
  check_labels(x, y);
  if (folds < 2) throw ConfigError("cross-validation needs at least two folds");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
  if (pos.size() < folds || neg.size() < pos.size()) {
    throw ConfigError("too few examples for balanced " + std::to_string(folds) + "-fold cross-validation");
  }

  Rng rng(derive_seed(seed, {0x6376ULL}));
  // Balance: keep a seeded random subset of negatives, sorted so the draw
  // does not depend on input order beyond the seed.
  shuffle(neg, rng);
  neg.resize(pos.size());
  std::sort(neg.begin(), neg.end());
  const Split split = stratified_folds(pos, neg, folds, rng);

  CrossValidationReport report = cross_validate_folds(x, y, split.folds);
  report.seed = seed;
  return report;
}

CrossValidationReport cross_validate_folds(const FeatureView& x, std::span<const std::uint8_t> y,
                                           const std::vector<std::vector<std::size_t>>& folds) {
  check_labels(x, y);
  if (folds.size() < 2) throw ConfigError("cross-validation needs at least two folds");
  CrossValidationReport report;
  for (const auto& fold : folds) {
    for (std::size_t r : fold) {
      if (r >= x.rows) throw ValidationError("fold row out of range");
      report.positives += y[r];
    }
  }
  const double k = static_cast<double>(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> train_rows;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
    }
    const Subset train = gather_rows(x, y, train_rows);
    const LogisticModel model = train_logistic(train.view(), train.labels);

    std::vector<std::uint8_t> truth, predicted;
    for (std::size_t r : folds[f]) {
      truth.push_back(y[r]);
      predicted.push_back(model.probability(x.row(r)) >= 0.5 ? 1 : 0);
    }
    const ClassificationMetrics m = classification_metrics(truth, predicted);
    report.folds.push_back(m);
    report.mean.precision += m.precision / k;
    report.mean.recall += m.recall / k;
    report.mean.f1 += m.f1 / k;
    report.mean.accuracy += m.accuracy / k;
  }
  return report;
}

std::vector<double> out_of_fold_scores(const FeatureView& x, std::span<const std::uint8_t> y, std::size_t folds,
                                       std::uint64_t seed) {
  check_labels(x, y);
  if (folds < 2) throw ConfigError("out-of-fold scoring needs at least two folds");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
  if (pos.size() < folds || neg.size() < folds) throw ConfigError("too few examples per class for out-of-fold scoring");

  Rng rng(derive_seed(seed, {0x6f6f66ULL}));
  const Split split = stratified_folds(pos, neg, folds, rng);
  std::vector<double> scores(x.rows, 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows;
    for (std::size_t g = 0; g < folds; ++g) {
      if (g != f) train_rows.insert(train_rows.end(), split.folds[g].begin(), split.folds[g].end());
    }
    const Subset train = gather_rows(x, y, train_rows);
    const LogisticModel model = train_logistic(train.view(), train.labels);
    // Rank by logit: same order as the probability, without saturation ties.
    for (std::size_t r : split.folds[f]) scores[r] = model.logit(x.row(r));
  }
  return scores;
}

// --- ranking metrics ----------------------------------------------------------

std::vector<std::size_t> ranking(const ScoreTable& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
    return scores.ids[a] < scores.ids[b];
  });
  return order;
}

CdfResult suspended_cdf(const ScoreTable& scores, std::span<const std::uint8_t> labels) {
  scores.validate();
  if (labels.size() != scores.size()) throw ValidationError("label count does not match score table");
  const std::size_t n = scores.size();
  const std::size_t total = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  if (total == 0) throw ValidationError("suspended CDF needs at least one suspended user");

  // Suspended count among the top k, k = 0..n.
  const auto order = ranking(scores);
  std::vector<std::size_t> captured(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) captured[k + 1] = captured[k] + labels[order[k]];

  // Counts are kept in hundredths of a node so that every point and the
  // area are exact rationals, each rounded once.
  CdfResult result;
  const double denom = static_cast<double>(kCdfPoints * total);
  std::uint64_t prev = 0;
  std::uint64_t twice_area = 0;
  for (std::size_t i = 1; i <= kCdfPoints; ++i) {
    // Position i% of the way down the ranking, measured in nodes.
    const std::size_t scaled = i * n;
    const std::size_t k = scaled / kCdfPoints;
    const std::size_t rem = scaled % kCdfPoints;
    std::uint64_t hundredths = kCdfPoints * captured[k];
    if (rem != 0) hundredths += (captured[k + 1] - captured[k]) * rem;
    result.cdf[i - 1] = static_cast<double>(hundredths) / denom;
    twice_area += prev + hundredths;
    prev = hundredths;
  }
  result.auc = static_cast<double>(twice_area) / (2.0 * kCdfPoints * denom);
  result.cdf.back() = 1.0;
  return result;
}

double precision_at_n(const ScoreTable& scores, std::span<const std::uint8_t> labels, std::size_t n) {
  scores.validate();
  if (labels.size() != scores.size()) throw ValidationError("label count does not match score table");
  if (n == 0 || n > scores.size()) throw ConfigError("precision@n needs 1 <= n <= node count");
  const auto order = ranking(scores);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) hits += labels[order[k]];
  return static_cast<double>(hits) / static_cast<double>(n);
}

ComparisonReport compare_models(std::span<const NamedScores> models, std::span<const std::uint8_t> labels,
                                std::span<const std::size_t> n_values) {
  ComparisonReport report;
  if (models.empty()) return report;
  std::vector<std::string> reference(models.front().scores.ids);
  std::sort(reference.begin(), reference.end());
  for (const NamedScores& m : models) {
    std::vector<std::string> ids(m.scores.ids);
    std::sort(ids.begin(), ids.end());
    if (ids != reference) throw ValidationError("model '" + m.name + "' scores a different node set");
    if (m.scores.ids != models.front().scores.ids) {
      throw ValidationError("model '" + m.name + "' lists nodes in a different order");
    }
  }
  for (const NamedScores& m : models) {
    ModelRow row;
    row.name = m.name;
    row.cdf = suspended_cdf(m.scores, labels);
    row.auc = row.cdf.auc;
    for (std::size_t n : n_values) {
      if (n >= 1 && n <= m.scores.size()) row.precision_at.emplace_back(n, precision_at_n(m.scores, labels, n));
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string comparison_json(const ComparisonReport& report) {
  nlohmann::ordered_json root;
  root["models"] = nlohmann::ordered_json::array();
  for (const ModelRow& row : report.rows) {
    nlohmann::ordered_json r;
    r["model"] = row.name;
    r["auc"] = row.auc;
    for (const auto& [n, p] : row.precision_at) r["precision_at_" + std::to_string(n)] = p;
    r["cdf"] = row.cdf.cdf;
    root["models"].push_back(std::move(r));
  }
  return root.dump(2);
}

void write_cdf_tsv(std::ostream& out, const ComparisonReport& report) {
  char buf[32];
  for (const ModelRow& row : report.rows) {
    for (std::size_t i = 0; i < kCdfPoints; ++i) {
      std::snprintf(buf, sizeof buf, "%.6f", row.cdf.cdf[i]);
      out << (i + 1) << '\t' << row.name << '\t' << buf << '\n';
    }
  }
}

void print_comparison_table(std::ostream& out, const ComparisonReport& report) {
  char buf[128];
  out << "Model           AUC";
  if (!report.rows.empty()) {
    for (const auto& [n, p] : report.rows.front().precision_at) out << "     P@" << n;
  }
  out << '\n';
  for (const ModelRow& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%-12s %6.4f", row.name.c_str(), row.auc);
    out << buf;
    for (const auto& [n, p] : row.precision_at) {
      std::snprintf(buf, sizeof buf, "  %6.3f", p);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace enwalk
