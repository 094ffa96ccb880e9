#pragma once

#include <optional>
#include <string>
#include <vector>

#include "parrot/gateway.hpp"
#include "parrot/prompts.hpp"
#include "parrot/rationale.hpp"

namespace parrot {

struct GcrConfig {
  double threshold = 3.0;
  int max_iterations = 1;  // refinements allowed after the initial generation

  void validate() const {
    if (!(threshold > 1.0 && threshold < 4.0))
      throw std::invalid_argument("gcr threshold must be in (1,4)");
    if (max_iterations < 0) throw std::invalid_argument("gcr max_iterations must be >= 0");
  }
};

enum class GcrDecision { Accept, Refine };

struct GcrStep {
  std::string request;  // the request this generation used
  ImageRef image;
  PointwiseAssessment assessment;
  GcrDecision decision = GcrDecision::Accept;
  std::string refined_request;  // set when decision == Refine
  std::string warning;          // all-N/A or missing-refinement notes
};

struct GcrTrace {
  std::string initial_request;
  std::vector<GcrStep> steps;
  ImageRef final_image;
  double total_latency_s = 0.0;
  int generator_calls = 0;
};

// Refine iff the minimum applicable (non-N/A) score is strictly below the
// threshold. All-N/A accepts and sets *warning.
GcrDecision decide(const PointwiseAssessment& assessment, double threshold,
                   std::string* warning = nullptr);

// Generate, critique, and refine at most cfg.max_iterations times; the last
// generation is final even if still below threshold.
GcrTrace run_gcr(const std::string& request, const std::optional<ImageRef>& source,
                 TaskKind kind, const GcrConfig& cfg, const GatewayClient& generator,
                 const GatewayClient& judge, const PromptTemplates& templates,
                 std::uint64_t seed = 0);

// One JSON object per step plus a trailing summary line.
std::string trace_to_jsonl(const GcrTrace& trace);

}  // namespace parrot
