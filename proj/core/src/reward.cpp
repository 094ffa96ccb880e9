#include "parrot/reward.hpp"

#include <algorithm>
#include <cmath>

namespace parrot {

DimensionScores DimensionScores::from_assessment(const PointwiseAssessment& a) {
  DimensionScores out;
  for (const auto& e : a.per_aspect) out.scores[e.aspect] = e.score;
  return out;
}

std::vector<Aspect> DimensionScores::active() const {
  std::vector<Aspect> out;
  for (Aspect a : kAllAspects) {
    auto it = scores.find(a);
    if (it != scores.end() && !it->second.is_na()) out.push_back(a);
  }
  return out;
}

double aggregate(const DimensionScores& scores, const RewardOptions& opts) {
  double sum = 0.0, weight = 0.0;
  for (const auto& [aspect, score] : scores.scores) {
    if (score.is_na()) continue;
    double w = 1.0;
    if (!opts.weights.empty()) {
      auto it = opts.weights.find(aspect);
      w = it == opts.weights.end() ? 1.0 : it->second;
    }
    sum += w * score.value();
    weight += w;
  }
  if (weight <= 0.0) throw NoActiveDimensions();
  return sum / weight;
}

namespace {

std::pair<double, double> mean_and_std(const std::vector<double>& v, bool sample) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double denom = sample ? static_cast<double>(v.size() - 1) : static_cast<double>(v.size());
  var /= denom;
  return {mean, std::sqrt(var)};
}

}  // namespace

std::vector<double> normalize_group(const std::vector<double>& raw, const RewardOptions& opts) {
  if (raw.size() < 2) throw GroupTooSmall(raw.size());
  const auto [mean, sd] = mean_and_std(raw, opts.sample_std);
  const double zc = std::max(sd, opts.epsilon);
  std::vector<double> out;
  out.reserve(raw.size());
  for (double r : raw) {
    const double z = std::clamp((r - mean) / zc, -1.0, 1.0);
    out.push_back(0.5 + 0.5 * z);
  }
  return out;
}

FilterDecision quality_filter(const std::vector<double>& normalized, const RewardOptions& opts) {
  if (normalized.empty()) return {false, "std"};
  const auto [mean, sd] = mean_and_std(normalized, /*sample=*/false);
  if (mean > opts.mean_threshold) return {false, "mean"};
  if (sd < opts.std_threshold) return {false, "std"};
  return {true, ""};
}

std::vector<std::string> select_training_prompts(
    const std::map<std::string, double>& mean_raw_by_prompt, double cutoff) {
  std::vector<std::string> out;
  for (const auto& [prompt, mean] : mean_raw_by_prompt) {
    if (mean < cutoff) out.push_back(prompt);
  }
  return out;
}

double pairwise_accuracy(const std::vector<BenchmarkItem>& items) {
  if (items.empty()) throw EmptyBenchmark();
  std::size_t correct = 0;
  for (const auto& item : items) {
    if (item.verdict == item.gold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

}  // namespace parrot
