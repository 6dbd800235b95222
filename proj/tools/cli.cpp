#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "enwalk/baselines.hpp"
#include "enwalk/dynamics.hpp"
#include "enwalk/embedder.hpp"
#include "enwalk/errors.hpp"
#include "enwalk/evaluator.hpp"
#include "enwalk/graph.hpp"
#include "enwalk/pipeline.hpp"
#include "enwalk/synthnet.hpp"
#include "enwalk/walker.hpp"
#include "json.hpp"

namespace enwalk::cli {

namespace {

namespace fs = std::filesystem;

unsigned default_workers() {
  if (const char* env = std::getenv("ENWALK_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

// --- flat key=value configuration ----------------------------------------------

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::map<std::string, std::string> values;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto first = raw.find_first_not_of(" \t\r");
    if (first == std::string::npos || raw[first] == '#') continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), line_no, "expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    values[trim(raw.substr(0, eq))] = trim(raw.substr(eq + 1));
  }
  return values;
}

// Options given on the command line win; the file fills the rest.
void apply_config(CLI::App* sub, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    if (key == "command") {
      if (value != sub->get_name()) throw ConfigError("config file is for '" + value + "'");
      continue;
    }
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config" || key == "help") throw ConfigError("unknown config key '" + key + "'");
    if (opt->count() > 0) continue;
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1") {
        opt->add_result(std::string("true"));
      } else if (value != "false" && value != "0") {
        throw ConfigError("config key '" + key + "' expects true or false");
      }
    } else {
      std::istringstream parts(value);
      std::string part;
      if (opt->get_items_expected_max() > 1) {
        while (parts >> part) opt->add_result(part);
      } else {
        opt->add_result(value);
      }
    }
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
}

// Effective parameters as key=value lines that read_config_file accepts.
void write_echo(CLI::App* sub, const fs::path& path) {
  std::ofstream out = open_output(path);
  out << "command=" << sub->get_name() << '\n';
  std::vector<std::pair<std::string, std::string>> lines;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) value += (i ? " " : "") + results[i];
      if (opt->get_type_size() == 0) value = "true";
    } else if (opt->get_type_size() == 0) {
      value = "false";
    } else {
      value = opt->get_default_str();
    }
    lines.emplace_back(name, value);
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& [k, v] : lines) out << k << '=' << v << '\n';
  finish(out, path);
}

// --- shared argument groups -----------------------------------------------------

struct GraphArgs {
  std::string edges;
  std::string users;
  std::string labels;

  void add(CLI::App* sub, bool with_labels) {
    sub->add_option("--edges", edges, "Edge list (src<TAB>dst[<TAB>weight])")->required();
    sub->add_option("--users", users, "User records, one JSON object per line")->required();
    if (with_labels) sub->add_option("--labels", labels, "Optional node<TAB>0|1 overrides of the suspended flag");
  }

  SpamGraph load() const { return load_graph(edges, users); }

  Labels load_labels(const SpamGraph& graph) const {
    if (labels.empty()) return resolve_labels(graph);
    std::ifstream in = open_input(labels);
    return resolve_labels(graph, read_labels_tsv(in, labels));
  }
};

struct WalkArgs {
  std::string strategy = "enwalk";
  std::string direction = "out";
  double p = 0.25, q = 0.25, r = 0.25, s = 0.25;
  double return_param = 1.0, inout_param = 0.5;
  std::uint32_t walks = 10;
  std::uint32_t length = 80;

  void add(CLI::App* sub, bool with_strategy) {
    if (with_strategy) {
      sub->add_option("--strategy", strategy, "Walk strategy")
          ->check(CLI::IsMember({"enwalk", "uniform", "node2vec"}));
    }
    sub->add_option("--direction", direction, "Follow edges forward or ignore direction")
        ->check(CLI::IsMember({"out", "undirected"}));
    sub->add_option("--p", p, "Priority of common activity time");
    sub->add_option("--q", q, "Priority of success-rate agreement");
    sub->add_option("--r", r, "Priority of fraudulence agreement");
    sub->add_option("--s", s, "Priority of common mentions");
    sub->add_option("--return", return_param, "Return parameter of node2vec-style walks");
    sub->add_option("--inout", inout_param, "In-out parameter of node2vec-style walks");
    sub->add_option("--walks", walks, "Walks per node");
    sub->add_option("--length", length, "Steps per walk");
  }

  BiasWeights bias() const { return {p, q, r, s}; }

  WalkConfig config(std::uint64_t seed, unsigned workers) const {
    WalkConfig c;
    c.walks_per_node = walks;
    c.walk_length = length;
    c.seed = seed;
    c.workers = workers;
    c.direction = direction == "undirected" ? Direction::kUndirected : Direction::kOut;
    if (strategy == "uniform") {
      c.strategy = UniformStrategy{};
    } else if (strategy == "node2vec") {
      c.strategy = ReturnInOutStrategy{return_param, inout_param};
    } else {
      c.strategy = EnwalkStrategy{bias()};
    }
    return c;
  }
};

struct EmbedArgs {
  EmbedConfig config;
  bool fast = false;

  void add(CLI::App* sub) {
    sub->add_option("--dim", config.dimension, "Embedding dimension");
    sub->add_option("--window", config.window, "Context window size");
    sub->add_option("--negatives", config.negatives, "Negative samples per context pair");
    sub->add_option("--epochs", config.epochs, "Passes over the walk corpus");
    sub->add_option("--lr", config.learning_rate, "Initial learning rate");
    sub->add_option("--noise-exponent", config.noise_exponent, "Exponent of the unigram noise distribution");
    sub->add_flag("--fast", fast, "Parallel lock-free training (not bit-reproducible)");
  }

  EmbedConfig resolve(std::uint64_t seed, unsigned workers) const {
    EmbedConfig c = config;
    c.seed = seed;
    c.deterministic = !fast;
    c.workers = fast ? workers : 1;
    return c;
  }
};

struct PageRankArgs {
  PageRankConfig config;

  void add(CLI::App* sub) {
    sub->add_option("--teleport", config.teleport, "Mass given to the prior each step");
    sub->add_option("--tolerance", config.tolerance, "L1 change that stops iteration");
    sub->add_option("--max-iter", config.max_iterations, "Iteration cap");
  }
};

struct MrfArgs {
  MRFConfig config;

  void add(CLI::App* sub) {
    sub->add_option("--damping", config.damping, "Weight kept on the previous message");
    sub->add_option("--mrf-tolerance", config.tolerance, "Max message change that stops iteration");
    sub->add_option("--mrf-max-iter", config.max_iterations, "Iteration cap");
  }
};

void write_scores_file(const fs::path& path, const ScoreTable& scores) {
  std::ofstream out = open_output(path);
  write_scores_tsv(out, scores);
  finish(out, path);
}

TrustModel load_trust_model(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_trust_model(in, path);
}

// --- subcommands ---------------------------------------------------------------

struct Command {
  CLI::App* app = nullptr;
  std::string config_file;
  // Path of the config echo.
  std::function<fs::path()> echo_path;
  std::function<void(std::ostream&)> action;
};

class Registry {
 public:
  explicit Registry(CLI::App& root) : root_(root) {}

  Command& add(const std::string& name, const std::string& description) {
    auto cmd = std::make_unique<Command>();
    cmd->app = root_.add_subcommand(name, description);
    cmd->app->add_option("--config", cmd->config_file, "Flat key=value file; command-line flags win");
    commands_.push_back(std::move(cmd));
    return *commands_.back();
  }

  Command* selected() {
    for (auto& c : commands_)
      if (c->app->parsed()) return c.get();
    return nullptr;
  }

 private:
  CLI::App& root_;
  std::vector<std::unique_ptr<Command>> commands_;
};

struct State {
  std::uint64_t seed = 1;
  unsigned workers = default_workers();
  std::string out;
  std::string walks_path;
  std::string embeddings_path;
  std::string trust_model;
  std::string variant = "traditional";
  std::string beliefs;
  std::string cdf;
  std::vector<std::string> score_files;
  std::vector<std::string> models = kAllModels;
  std::vector<std::size_t> precision_n{100};
  std::size_t folds = 10;
  std::size_t per_class = 400;
  std::string name = "model";
  SynthConfig synth;
  GraphArgs graph;
  WalkArgs walk;
  EmbedArgs embed;
  PageRankArgs pagerank;
  MrfArgs mrf;
};

void add_seed_workers(CLI::App* sub, State& st) {
  sub->add_option("--seed", st.seed, "Random seed");
  sub->add_option("--workers", st.workers, "Worker threads (env ENWALK_WORKERS sets the default)")
      ->check(CLI::PositiveNumber);
}

void register_commands(Registry& reg, State& st) {
  {
    Command& c = reg.add("synth", "Generate a synthetic follower network with planted spammers");
    auto* a = c.app;
    a->add_option("--n", st.synth.nodes, "Number of users");
    a->add_option("--spam-frac", st.synth.spam_fraction, "Fraction of spammers");
    a->add_option("--vigilant-frac", st.synth.vigilant_fraction, "Fraction of spammers that are vigilant");
    a->add_option("--horizon", st.synth.horizon_days, "Days covered by activity records");
    a->add_option("--seed", st.seed, "Random seed");
    a->add_option("--out", st.out, "Output directory")->required();
    c.echo_path = [&st] { return fs::path(st.out) / "config.txt"; };
    c.action = [&st](std::ostream& out) {
      SynthConfig cfg = st.synth;
      cfg.seed = st.seed;
      const SynthNetwork net = generate(cfg);
      fs::create_directories(st.out);
      write_synth(net, st.out);
      out << "nodes " << net.graph.node_count() << " edges " << net.graph.edge_count() << " spammers "
          << std::count(net.labels.begin(), net.labels.end(), 1) << '\n';
    };
  }
  {
    Command& c = reg.add("ingest", "Validate and normalize a graph; report load statistics");
    st.graph.add(c.app, false);
    c.app->add_option("--out", st.out, "Output directory for normalized files")->required();
    c.echo_path = [&st] { return fs::path(st.out) / "config.txt"; };
    c.action = [&st](std::ostream& out) {
      const SpamGraph g = st.graph.load();
      fs::create_directories(st.out);
      save_graph(g, fs::path(st.out) / "edges.tsv", fs::path(st.out) / "users.jsonl");
      nlohmann::ordered_json stats;
      stats["nodes"] = g.node_count();
      stats["edges"] = g.edge_count();
      stats["self_loops_dropped"] = g.load_stats().self_loops_dropped;
      stats["duplicate_edges_merged"] = g.load_stats().duplicate_edges_merged;
      stats["defaulted_records"] = g.load_stats().defaulted_records;
      const fs::path path = fs::path(st.out) / "stats.json";
      std::ofstream f = open_output(path);
      f << stats.dump(2) << '\n';
      finish(f, path);
      out << stats.dump() << '\n';
    };
  }
  {
    Command& c = reg.add("dynamics", "Compute pair dynamics for every edge");
    st.graph.add(c.app, false);
    c.app->add_option("--out", st.out, "Output pairs.tsv")->required();
    c.echo_path = [&st] { return fs::path(st.out + ".config"); };
    c.action = [&st](std::ostream&) {
      const SpamGraph g = st.graph.load();
      const DynamicsTable table(g);
      std::ofstream f = open_output(st.out);
      write_pairs_tsv(f, table);
      finish(f, st.out);
    };
  }
  {
    Command& c = reg.add("walk", "Generate a random-walk corpus");
    st.graph.add(c.app, false);
    st.walk.add(c.app, true);
    add_seed_workers(c.app, st);
    c.app->add_option("--out", st.out, "Output walks.txt")->required();
    c.echo_path = [&st] { return fs::path(st.out + ".config"); };
    c.action = [&st](std::ostream& out) {
      const SpamGraph g = st.graph.load();
      const WalkConfig wc = st.walk.config(st.seed, st.workers);
      std::optional<DynamicsTable> dyn;
      if (std::holds_alternative<EnwalkStrategy>(wc.strategy)) dyn.emplace(g);
      const WalkCorpus corpus = Walker(g, wc, dyn ? &*dyn : nullptr).generate_corpus();
      std::ofstream f = open_output(st.out);
      write_walks(f, corpus, g);
      finish(f, st.out);
      out << "walks " << corpus.walks.size() << " tokens " << corpus.token_count() << '\n';
    };
  }
  {
    Command& c = reg.add("embed", "Train skip-gram embeddings on a walk corpus");
    st.graph.add(c.app, false);
    c.app->add_option("--walks", st.walks_path, "Input walks.txt")->required();
    st.embed.add(c.app);
    add_seed_workers(c.app, st);
    c.app->add_option("--out", st.out, "Output embeddings.txt")->required();
    c.echo_path = [&st] { return fs::path(st.out + ".config"); };
    c.action = [&st](std::ostream& out) {
      const SpamGraph g = st.graph.load();
      std::ifstream in = open_input(st.walks_path);
      const WalkCorpus corpus = read_walks(in, g, st.walks_path);
      const TrainResult r = train(corpus, g.node_count(), st.embed.resolve(st.seed, st.workers));
      std::ofstream f = open_output(st.out);
      write_embeddings(f, r.embedding, g.ids());
      finish(f, st.out);
      for (std::size_t e = 0; e < r.epoch_mean_loss.size(); ++e) {
        out << "epoch " << e + 1 << " mean loss " << r.epoch_mean_loss[e] << '\n';
      }
    };
  }
  {
    Command& c = reg.add("trust-fit", "Fit the linear trust-score model from suspension labels");
    st.graph.add(c.app, true);
    c.app->add_option("--per-class", st.per_class, "Labelled users drawn per class");
    c.app->add_option("--seed", st.seed, "Random seed");
    c.app->add_option("--out", st.out, "Output model.json")->required();
    c.echo_path = [&st] { return fs::path(st.out + ".config"); };
    c.action = [&st](std::ostream& out) {
      const SpamGraph g = st.graph.load();
      const Labels labels = st.graph.load_labels(g);
      const TrustFit fit = fit_trust(synthetic_trust_labels(g, labels, st.per_class, st.seed));
      if (fit.ridge_fallback) out << "warning: rank-deficient design, ridge penalty added\n";
      std::ofstream f = open_output(st.out);
      write_trust_model(f, fit.model);
      finish(f, st.out);
    };
  }
  {
    Command& c = reg.add("pagerank", "Rank users with traditional or trust-weighted PageRank");
    st.graph.add(c.app, false);
    st.pagerank.add(c.app);
    c.app->add_option("--variant", st.variant, "traditional or trust")
        ->check(CLI::IsMember({"traditional", "trust"}));
    c.app->add_option("--trust-model", st.trust_model, "Trust model.json (trust variant)");
    c.app->add_option("--out", st.out, "Output scores.tsv (higher = more spammy)")->required();
    c.echo_path = [&st] { return fs::path(st.out + ".config"); };
    c.action = [&st](std::ostream& out) {
      const SpamGraph g = st.graph.load();
      PageRankConfig cfg = st.pagerank.config;
      std::vector<double> trust;
      if (st.variant == "trust") {
        if (st.trust_model.empty()) throw ConfigError("--variant trust needs --trust-model");
        cfg.variant = PageRankVariant::kTrust;
        trust = trust_scores(g, load_trust_model(st.trust_model));
      }
      const PageRankResult r = pagerank(g, cfg, trust);
      if (!r.converged) out << "warning: PageRank stopped after " << r.iterations << " iterations\n";
      write_scores_file(st.out, ScoreTable::from_graph(g, pagerank_spamicity(r.rank)));
    };
  }
  {
    Command& c = reg.add("mrf", "Three-state MRF with loopy belief propagation");
    st.graph.add(c.app, false);
    st.mrf.add(c.app);
    c.app->add_option("--trust-model", st.trust_model, "Trust model.json for node priors")->required();
    c.app->add_option("--beliefs", st.beliefs, "Optional beliefs.tsv output");
    c.app->add_option("--out", st.out, "Output scores.tsv (P(spammer))")->required();
    c.echo_path = [&st] { return fs::path(st.out + ".config"); };
    c.action = [&st](std::ostream& out) {
      const SpamGraph g = st.graph.load();
      const auto trust = trust_scores(g, load_trust_model(st.trust_model));
      const LbpResult r = lbp_marginals_from_trust(g, st.mrf.config, trust);
      if (!r.converged) out << "warning: belief propagation stopped after " << r.iterations << " iterations\n";
      std::vector<double> spam(g.node_count());
      for (NodeIndex v = 0; v < g.node_count(); ++v) spam[v] = r.beliefs[v][0];
      write_scores_file(st.out, ScoreTable::from_graph(g, std::move(spam)));
      if (!st.beliefs.empty()) {
        std::ofstream f = open_output(st.beliefs);
        char buf[96];
        for (NodeIndex v = 0; v < g.node_count(); ++v) {
          std::snprintf(buf, sizeof buf, "\t%.17g\t%.17g\t%.17g\n", r.beliefs[v][0], r.beliefs[v][1], r.beliefs[v][2]);
          f << g.id(v) << buf;
        }
        finish(f, st.beliefs);
      }
    };
  }
  {
    Command& c = reg.add("eval", "Cross-validate an embedding and rank by out-of-fold scores");
    st.graph.add(c.app, true);
    auto* emb = c.app->add_option("--embeddings", st.embeddings_path, "embeddings.txt to classify");
    auto* sc = c.app->add_option("--scores", st.score_files, "scores.tsv to rank instead")->expected(1);
    emb->excludes(sc);
    c.app->add_option("--name", st.name, "Model name used in the report");
    c.app->add_option("--folds", st.folds, "Cross-validation folds");
    c.app->add_option("--precision-n", st.precision_n, "Cutoffs for precision@n");
    c.app->add_option("--seed", st.seed, "Random seed");
    c.app->add_option("--scores-out", st.cdf, "Write the out-of-fold scores here");
    c.app->add_option("--out", st.out, "Output report.json")->required();
    c.echo_path = [&st] { return fs::path(st.out + ".config"); };
    c.action = [&st](std::ostream& out) {
      const SpamGraph g = st.graph.load();
      const Labels labels = st.graph.load_labels(g);
      nlohmann::ordered_json report;
      ScoreTable scores;
      if (!st.embeddings_path.empty()) {
        std::ifstream in = open_input(st.embeddings_path);
        const EmbeddingMatrix emb = read_embeddings(in, g, st.embeddings_path);
        const CrossValidationReport cv = cross_validate(feature_view(emb), labels, st.folds, st.seed);
        report["classification"] = {{"precision", cv.mean.precision},
                                    {"recall", cv.mean.recall},
                                    {"f1", cv.mean.f1},
                                    {"accuracy", cv.mean.accuracy},
                                    {"folds", st.folds},
                                    {"positives", cv.positives},
                                    {"seed", st.seed}};
        scores = embedding_scores(g, emb, labels, st.folds, st.seed);
        if (!st.cdf.empty()) write_scores_file(st.cdf, scores);
      } else if (!st.score_files.empty()) {
        std::ifstream in = open_input(st.score_files.front());
        scores = read_scores_tsv(in, g, st.score_files.front());
      } else {
        throw ConfigError("eval needs --embeddings or --scores");
      }
      const std::vector<NamedScores> models{{st.name, std::move(scores)}};
      const ComparisonReport cmp = compare_models(models, labels, st.precision_n);
      const auto ranking = nlohmann::ordered_json::parse(comparison_json(cmp));
      report["ranking"] = ranking["models"][0];
      std::ofstream f = open_output(st.out);
      f << report.dump(2) << '\n';
      finish(f, st.out);
      print_comparison_table(out, cmp);
    };
  }
  {
    Command& c = reg.add("compare", "Compare rankers; runs the full pipeline unless --scores are given");
    auto* a = c.app;
    st.graph.add(a, true);
    st.walk.add(a, false);
    st.embed.add(a);
    st.pagerank.add(a);
    st.mrf.add(a);
    add_seed_workers(a, st);
    a->add_option("--scores", st.score_files, "NAME=scores.tsv, repeatable");
    a->add_option("--models", st.models, "Models to run in pipeline mode")->delimiter(',');
    a->add_option("--folds", st.folds, "Cross-validation folds");
    a->add_option("--per-class", st.per_class, "Synthetic trust labels per class");
    a->add_option("--precision-n", st.precision_n, "Cutoffs for precision@n");
    a->add_option("--cdf", st.cdf, "Optional cdf.tsv output");
    a->add_option("--out", st.out, "Output report.json")->required();
    c.echo_path = [&st] { return fs::path(st.out + ".config"); };
    c.action = [&st](std::ostream& out) {
      const SpamGraph g = st.graph.load();
      const Labels labels = st.graph.load_labels(g);
      std::string json;
      ComparisonReport cmp;
      if (!st.score_files.empty()) {
        std::vector<NamedScores> models;
        for (const std::string& entry : st.score_files) {
          const auto eq = entry.find('=');
          if (eq == std::string::npos || eq == 0) throw ConfigError("--scores expects NAME=path, got '" + entry + "'");
          const std::string path = entry.substr(eq + 1);
          std::ifstream in = open_input(path);
          models.push_back({entry.substr(0, eq), read_scores_tsv(in, g, path)});
        }
        cmp = compare_models(models, labels, st.precision_n);
        json = comparison_json(cmp);
      } else {
        PipelineConfig pc;
        pc.seed = st.seed;
        pc.walk = st.walk.config(st.seed, st.workers);
        pc.bias = st.walk.bias();
        pc.return_inout = {st.walk.return_param, st.walk.inout_param};
        pc.embed = st.embed.resolve(st.seed, st.workers);
        pc.pagerank = st.pagerank.config;
        pc.mrf = st.mrf.config;
        pc.trust_labels_per_class = st.per_class;
        pc.folds = st.folds;
        pc.precision_n = st.precision_n;
        pc.models = st.models;
        const PipelineResult r = run_pipeline(g, labels, pc);
        cmp = r.report;
        json = pipeline_json(r);
      }
      std::ofstream f = open_output(st.out);
      f << json << '\n';
      finish(f, st.out);
      if (!st.cdf.empty()) {
        std::ofstream cdf = open_output(st.cdf);
        write_cdf_tsv(cdf, cmp);
        finish(cdf, st.cdf);
      }
      print_comparison_table(out, cmp);
    };
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spam-aware random-walk embeddings and baseline spam rankers", "enwalk"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  State st;
  Registry reg(app);
  register_commands(reg, st);

  // With a config file, required options may come from the file, so they
  // are checked after it is merged.
  std::vector<std::pair<const CLI::App*, CLI::Option*>> deferred;
  if (std::find(args.begin(), args.end(), "--config") != args.end()) {
    for (CLI::App* sub : app.get_subcommands({})) {
      for (CLI::Option* opt : sub->get_options()) {
        if (opt->get_required()) {
          opt->required(false);
          deferred.emplace_back(sub, opt);
        }
      }
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help arrives as CallForHelp from the subcommand itself.
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      for (const CLI::App* sub : app.get_subcommands({})) {
        if (sub->parsed()) {
          out << sub->help();
          return kExitOk;
        }
      }
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitInvalid;
  }

  Command* cmd = reg.selected();
  if (cmd == nullptr) {
    err << "error: no subcommand given\n";
    return kExitInvalid;
  }
  try {
    if (!cmd->config_file.empty()) apply_config(cmd->app, read_config_file(cmd->config_file));
    for (const auto& [owner, opt] : deferred) {
      if (owner == cmd->app && opt->count() == 0) {
        throw ConfigError(opt->get_name() + " is required");
      }
    }
    cmd->action(out);
    write_echo(cmd->app, cmd->echo_path());
    return kExitOk;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

}  // namespace enwalk::cli
