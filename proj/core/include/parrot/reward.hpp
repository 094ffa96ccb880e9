#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "parrot/rationale.hpp"

namespace parrot {

struct NoActiveDimensions : std::runtime_error {
  NoActiveDimensions() : std::runtime_error("all dimensions are N/A") {}
};

struct GroupTooSmall : std::runtime_error {
  explicit GroupTooSmall(std::size_t k)
      : std::runtime_error("reward group needs K >= 2, got " + std::to_string(k)) {}
};

struct EmptyBenchmark : std::runtime_error {
  EmptyBenchmark() : std::runtime_error("empty benchmark item list") {}
};

// Per-image dimension scores; N/A dimensions are excluded from aggregation.
struct DimensionScores {
  std::map<Aspect, Score> scores;

  static DimensionScores from_assessment(const PointwiseAssessment& a);
  std::vector<Aspect> active() const;
};

struct RewardOptions {
  // Z_c floor; keeps the all-equal group finite.
  double epsilon = 1e-6;
  // Population (default) vs sample standard deviation for Z_c.
  bool sample_std = false;
  // Optional per-dimension weights; empty means uniform.
  std::map<Aspect, double> weights;
  // Quality-filter thresholds on normalized rewards.
  double mean_threshold = 0.9;
  double std_threshold = 0.05;
};

// Equal-weight mean over applicable dimensions; result in [1,4].
double aggregate(const DimensionScores& scores, const RewardOptions& opts = {});

// Per-group map r -> 0.5 + 0.5 * clip((r - mean) / Z_c, -1, 1) with
// Z_c = max(std, epsilon). Outputs are in [0,1].
std::vector<double> normalize_group(const std::vector<double>& raw,
                                    const RewardOptions& opts = {});

struct FilterDecision {
  bool keep = true;
  std::string reason;  // "mean" or "std" when skipped
};

// Skips groups that carry no learning signal: normalized mean > mean_threshold
// (near-solved) or normalized std < std_threshold (near-uniform).
FilterDecision quality_filter(const std::vector<double>& normalized,
                              const RewardOptions& opts = {});

// Prompts whose mean raw score (1-4 scale) is strictly below 3.0.
std::vector<std::string> select_training_prompts(
    const std::map<std::string, double>& mean_raw_by_prompt, double cutoff = 3.0);

struct BenchmarkItem {
  std::string id;
  Winner gold = Winner::A;
  Winner verdict = Winner::A;
};

// Fraction of verdicts equal to gold; a Tie verdict against a non-Tie gold
// counts as incorrect.
double pairwise_accuracy(const std::vector<BenchmarkItem>& items);

}  // namespace parrot
