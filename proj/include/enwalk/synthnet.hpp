#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "enwalk/graph.hpp"

namespace enwalk {

enum class Role : std::uint8_t { kNormal, kVigilant, kFollowFlood };

struct CohortProfile {
  double window_mean_days;
  double window_sd_days;
  double fraud_mean;
  double mentions_per_tweet;
  double tweets_per_active_day;
  double active_day_prob;  // inside the activity window
  double follows_mean;     // initiated follow requests
  double follow_back_prob;
};

struct SynthConfig {
  std::size_t nodes = 2000;
  double spam_fraction = 0.05;
  double vigilant_fraction = 0.5;
  std::uint64_t seed = 1;

  std::uint32_t horizon_days = 214;
  double normal_follows_mean = 8.0;
  double normal_follow_back_prob = 0.15;
  double normal_fraud_mean = 0.02;
  double normal_mentions_per_tweet = 0.05;
  double normal_tweets_per_active_day = 2.0;
  double normal_active_day_prob = 0.3;

  CohortProfile vigilant{138.0, 19.0, 0.34, 0.2, 3.0, 0.5, 15.0, 0.8};
  CohortProfile follow_flood{35.0, 12.0, 0.86, 0.4, 6.0, 0.7, 60.0, 0.1};

  // Follows each spammer sends to members of its own cohort.
  double cohort_follows_mean = 5.0;
  // Beta concentration of the per-user fraud fraction.
  double fraud_concentration = 20.0;
  std::size_t mention_vocabulary = 500;
  std::size_t cohort_token_pool = 30;
  double cohort_token_share = 0.7;
  std::size_t campaigns_per_cohort = 4;

  void validate() const;
};

struct SynthNetwork {
  SpamGraph graph;
  Labels labels;
  std::vector<Role> roles;
};

// Deterministic per seed.
SynthNetwork generate(const SynthConfig& config);

// Writes edges.tsv, users.jsonl and labels.tsv into `dir`.
void write_synth(const SynthNetwork& net, const std::filesystem::path& dir);

}  // namespace enwalk
