#include "enwalk/synthnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <unordered_set>

#include "enwalk/errors.hpp"
#include "enwalk/rng.hpp"

namespace enwalk {

namespace {

struct Wiring {
  explicit Wiring(std::size_t n) : out(n), in_degree(n, 0) {}

  bool follows(NodeIndex a, NodeIndex b) const { return out[a].contains(b); }

  bool add(NodeIndex a, NodeIndex b) {
    if (a == b || !out[a].insert(b).second) return false;
    ++in_degree[b];
    return true;
  }

  void remove(NodeIndex a, NodeIndex b) {
    if (out[a].erase(b)) --in_degree[b];
  }

  std::size_t out_degree(NodeIndex a) const { return out[a].size(); }

  std::vector<std::unordered_set<NodeIndex>> out;
  std::vector<std::size_t> in_degree;
};

std::size_t poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<std::size_t>(mean)(rng.engine());
}

double beta(Rng& rng, double mean, double concentration) {
  const double a = mean * concentration;
  const double b = (1.0 - mean) * concentration;
  const double x = std::gamma_distribution<double>(a, 1.0)(rng.engine());
  const double y = std::gamma_distribution<double>(b, 1.0)(rng.engine());
  return x + y > 0.0 ? x / (x + y) : mean;
}

std::uint64_t binomial(Rng& rng, std::uint64_t n, double p) {
  if (n == 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<std::uint64_t>(n, p)(rng.engine());
}

std::size_t normal_count(Rng& rng, double mean, double sd, std::size_t lo, std::size_t hi) {
  const double x = std::normal_distribution<double>(mean, sd)(rng.engine());
  return static_cast<std::size_t>(std::clamp(std::llround(x), static_cast<long long>(lo), static_cast<long long>(hi)));
}

// Inverse-CDF Zipf sampler over ranks 0..n-1.
class Zipf {
 public:
  Zipf(std::size_t n, double exponent) : cumulative_(n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += 1.0 / std::pow(static_cast<double>(k + 1), exponent);
      cumulative_[k] = acc;
    }
  }

  std::size_t operator()(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

// Preferential attachment pool: each normal user appears once plus once
// per follower it has gained.
class AttachmentPool {
 public:
  void add(NodeIndex v) { slots_.push_back(v); }
  bool empty() const { return slots_.empty(); }
  NodeIndex draw(Rng& rng) const { return slots_[rng.below(slots_.size())]; }

 private:
  std::vector<NodeIndex> slots_;
};

std::vector<std::uint32_t> draw_active_days(Rng& rng, std::uint32_t start, std::uint32_t length, double prob) {
  std::vector<std::uint32_t> days;
  for (std::uint32_t d = 0; d < length; ++d) {
    if (d == 0 || d + 1 == length || rng.bernoulli(prob)) days.push_back(start + d);
  }
  return days;
}

std::string token(const char* prefix, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%03zu", prefix, k);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (nodes < 10) throw ConfigError("synthetic network needs at least 10 nodes");
  if (!(spam_fraction >= 0.0 && spam_fraction <= 1.0)) throw ConfigError("spam fraction must lie in [0,1]");
  if (!(vigilant_fraction >= 0.0 && vigilant_fraction <= 1.0)) {
    throw ConfigError("vigilant fraction must lie in [0,1]");
  }
  if (spam_fraction > 0.0 && spam_fraction * static_cast<double>(nodes) < 1.0) {
    throw ConfigError("spam fraction plants less than one spammer");
  }
  const auto spammers = static_cast<std::size_t>(std::llround(spam_fraction * static_cast<double>(nodes)));
  if (nodes - spammers < 2) throw ConfigError("synthetic network needs at least two normal users");
  if (horizon_days < 2) throw ConfigError("horizon must span at least two days");
  for (const CohortProfile* c : {&vigilant, &follow_flood}) {
    if (!(c->fraud_mean > 0.0 && c->fraud_mean < 1.0)) throw ConfigError("cohort fraud mean must lie in (0,1)");
    if (c->window_mean_days < 1.0 || c->window_sd_days < 0.0) throw ConfigError("bad cohort activity window");
  }
  if (!(normal_fraud_mean > 0.0 && normal_fraud_mean < 1.0)) throw ConfigError("normal fraud mean must lie in (0,1)");
  if (fraud_concentration <= 0.0) throw ConfigError("fraud concentration must be positive");
  if (mention_vocabulary == 0 || cohort_token_pool == 0) throw ConfigError("mention vocabularies must be nonempty");
}

SynthNetwork generate(const SynthConfig& config) {
  config.validate();
  const std::size_t n = config.nodes;
  const auto spammers = static_cast<std::size_t>(std::llround(config.spam_fraction * static_cast<double>(n)));
  const auto vigilant = static_cast<std::size_t>(std::llround(config.vigilant_fraction * static_cast<double>(spammers)));

  Rng rng(derive_seed(config.seed, {0x73796e7468ULL}));

  // Roles are scattered over the index range so arrival order is mixed.
  std::vector<Role> roles(n, Role::kNormal);
  {
    std::vector<NodeIndex> perm(n);
    for (NodeIndex v = 0; v < n; ++v) perm[v] = v;
    shuffle(perm, rng);
    for (std::size_t i = 0; i < spammers; ++i) roles[perm[i]] = i < vigilant ? Role::kVigilant : Role::kFollowFlood;
  }
  std::vector<NodeIndex> normals, vig, flood;
  for (NodeIndex v = 0; v < n; ++v) {
    (roles[v] == Role::kNormal ? normals : roles[v] == Role::kVigilant ? vig : flood).push_back(v);
  }

  Wiring wiring(n);
  AttachmentPool pool;

  // Normal users: directed preferential attachment with reflexive follow-back.
  for (std::size_t k = 0; k < normals.size(); ++k) {
    const NodeIndex u = normals[k];
    if (!pool.empty()) {
      const std::size_t want = std::min(k, 1 + poisson(rng, config.normal_follows_mean - 1.0));
      std::size_t tries = 0;
      while (wiring.out_degree(u) < want && tries++ < 50 * want) {
        const NodeIndex v = pool.draw(rng);
        if (wiring.add(u, v)) {
          pool.add(v);
          if (rng.bernoulli(config.normal_follow_back_prob) && wiring.add(v, u)) pool.add(u);
        }
      }
    }
    pool.add(u);
  }

  auto wire_spammer = [&](NodeIndex s, const CohortProfile& profile, const std::vector<NodeIndex>& cohort) {
    const std::size_t want = std::min(normals.size(), normal_count(rng, profile.follows_mean, profile.follows_mean / 4.0, 1,
                                                                   normals.size()));
    std::size_t tries = 0;
    while (wiring.out_degree(s) < want && tries++ < 50 * want) {
      const NodeIndex v = pool.draw(rng);
      if (wiring.add(s, v) && rng.bernoulli(profile.follow_back_prob)) wiring.add(v, s);
    }
    if (cohort.size() > 1) {
      const std::size_t peers = std::min(cohort.size() - 1, poisson(rng, config.cohort_follows_mean));
      std::size_t added = 0;
      tries = 0;
      while (added < peers && tries++ < 50 * (peers + 1)) {
        if (wiring.add(s, cohort[rng.below(cohort.size())])) ++added;
      }
    }
  };
  for (NodeIndex s : flood) wire_spammer(s, config.follow_flood, flood);
  for (NodeIndex s : vig) wire_spammer(s, config.vigilant, vig);

  // Enforce the success-rate typology exactly: follow-flood users follow more
  // than they are followed; vigilant users are followed at least as much.
  auto random_normal = [&] { return normals[rng.below(normals.size())]; };
  for (NodeIndex s : flood) {
    while (wiring.in_degree[s] >= wiring.out_degree(s)) {
      bool changed = false;
      if (wiring.out_degree(s) < normals.size()) {
        for (int attempt = 0; attempt < 1000 && !changed; ++attempt) changed = wiring.add(s, random_normal());
      }
      if (!changed) {
        for (NodeIndex v : normals) {
          if (wiring.follows(v, s)) {
            wiring.remove(v, s);
            changed = true;
            break;
          }
        }
      }
      if (!changed) throw ConfigError("cannot realize follow-flood degree constraint");
    }
  }
  for (NodeIndex s : vig) {
    while (wiring.in_degree[s] < wiring.out_degree(s)) {
      bool changed = false;
      for (int attempt = 0; attempt < 1000 && !changed; ++attempt) changed = wiring.add(random_normal(), s);
      if (!changed) {
        for (NodeIndex v : normals) {
          if (wiring.follows(s, v)) {
            wiring.remove(s, v);
            changed = true;
            break;
          }
        }
      }
      if (!changed) throw ConfigError("cannot realize vigilant degree constraint");
    }
  }

  // Behavioral records.
  const Zipf celebrity(config.mention_vocabulary, 1.1);
  const std::uint32_t horizon = config.horizon_days;
  auto campaign_starts = [&](double mean_len) {
    std::vector<std::uint32_t> starts;
    const double room = std::max(0.0, static_cast<double>(horizon) - mean_len);
    for (std::size_t c = 0; c < std::max<std::size_t>(1, config.campaigns_per_cohort); ++c) {
      starts.push_back(static_cast<std::uint32_t>(rng.uniform() * room));
    }
    return starts;
  };
  const auto vig_starts = campaign_starts(config.vigilant.window_mean_days);
  const auto flood_starts = campaign_starts(config.follow_flood.window_mean_days);

  std::vector<UserRecord> records(n);
  for (NodeIndex v = 0; v < n; ++v) {
    UserRecord& r = records[v];
    const Role role = roles[v];
    const CohortProfile* profile = role == Role::kVigilant ? &config.vigilant
                                   : role == Role::kFollowFlood ? &config.follow_flood
                                                                : nullptr;
    std::uint32_t length = 0, start = 0;
    double active_prob = config.normal_active_day_prob;
    double tweet_rate = config.normal_tweets_per_active_day;
    double mention_rate = config.normal_mentions_per_tweet;
    double fraud_mean = config.normal_fraud_mean;
    if (profile) {
      length = static_cast<std::uint32_t>(normal_count(rng, profile->window_mean_days, profile->window_sd_days, 1, horizon));
      const auto& starts = role == Role::kVigilant ? vig_starts : flood_starts;
      const long long jitter = static_cast<long long>(rng.below(11)) - 5;
      const long long base = static_cast<long long>(starts[rng.below(starts.size())]) + jitter;
      start = static_cast<std::uint32_t>(std::clamp<long long>(base, 0, horizon - length));
      active_prob = profile->active_day_prob;
      tweet_rate = profile->tweets_per_active_day;
      mention_rate = profile->mentions_per_tweet;
      fraud_mean = profile->fraud_mean;
    } else {
      length = 7 + static_cast<std::uint32_t>(rng.below(horizon - 6));
      length = std::min(length, horizon);
      start = static_cast<std::uint32_t>(rng.below(horizon - length + 1));
    }
    r.active_days = draw_active_days(rng, start, length, active_prob);

    r.total_tweets = std::max<std::uint64_t>(1, poisson(rng, tweet_rate * static_cast<double>(r.active_days.size())));
    const double fraud_frac = beta(rng, fraud_mean, config.fraud_concentration);
    r.fraud_tweets = binomial(rng, r.total_tweets, fraud_frac);

    const std::size_t mention_events = std::min<std::size_t>(200, poisson(rng, mention_rate * static_cast<double>(r.total_tweets)));
    for (std::size_t m = 0; m < mention_events; ++m) {
      std::string t;
      if (profile && rng.bernoulli(config.cohort_token_share)) {
        t = token(role == Role::kVigilant ? "#deal" : "@promo", rng.below(config.cohort_token_pool));
      } else {
        t = token("@celeb", celebrity(rng));
      }
      ++r.mentions[t];
    }

    r.followers = wiring.in_degree[v];
    r.followings = wiring.out_degree(v);
    const bool spam = profile != nullptr;
    const double duplicate_rate = role == Role::kFollowFlood ? 0.3 : role == Role::kVigilant ? 0.15 : 0.02;
    r.trust_features = {
        static_cast<double>(binomial(rng, r.fraud_tweets, spam ? 0.4 : 0.05)),
        static_cast<double>(r.total_tweets),
        static_cast<double>(mention_events),
        static_cast<double>(binomial(rng, r.total_tweets, duplicate_rate)),
        static_cast<double>(binomial(rng, r.fraud_tweets, 0.2)),
        static_cast<double>(binomial(rng, r.total_tweets, 0.01)),
        static_cast<double>(binomial(rng, r.fraud_tweets, 0.5)),
        static_cast<double>(r.active_days.empty() ? 0 : r.active_days.back() - r.active_days.front() + 1),
    };
    r.suspended = spam;
  }

  SpamGraph::Builder builder;
  const int width = static_cast<int>(std::to_string(n - 1).size());
  for (NodeIndex v = 0; v < n; ++v) {
    char id[32];
    std::snprintf(id, sizeof id, "u%0*u", width, v);
    builder.add_node(id, std::move(records[v]));
  }
  for (NodeIndex v = 0; v < n; ++v) {
    std::vector<NodeIndex> targets(wiring.out[v].begin(), wiring.out[v].end());
    std::sort(targets.begin(), targets.end());
    for (NodeIndex t : targets) builder.add_edge(v, t);
  }

  SynthNetwork net{std::move(builder).build(), Labels(n, 0), std::move(roles)};
  for (NodeIndex v = 0; v < n; ++v) net.labels[v] = net.roles[v] == Role::kNormal ? 0 : 1;
  return net;
}

void write_synth(const SynthNetwork& net, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_graph(net.graph, dir / "edges.tsv", dir / "users.jsonl");
  std::ofstream labels(dir / "labels.tsv");
  if (!labels) throw IoError("cannot write " + (dir / "labels.tsv").string());
  write_labels_tsv(labels, net.graph, net.labels);
}

}  // namespace enwalk
