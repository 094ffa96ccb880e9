#include "parrot/gcr.hpp"

#include <chrono>
#include <limits>

#include <json.hpp>

#include "parrot/util.hpp"

namespace parrot {

using nlohmann::json;

GcrDecision decide(const PointwiseAssessment& assessment, double threshold, std::string* warning) {
  double min_score = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& entry : assessment.per_aspect) {
    if (entry.score.is_na()) continue;
    any = true;
    min_score = std::min(min_score, entry.score.value());
  }
  if (!any) {
    if (warning != nullptr) *warning = "all dimensions N/A; accepting vacuously";
    return GcrDecision::Accept;
  }
  return min_score < threshold ? GcrDecision::Refine : GcrDecision::Accept;
}

namespace {

PointwiseAssessment critique(const std::string& request, const std::optional<ImageRef>& source,
                             const ImageRef& image, TaskKind kind, const GatewayClient& judge,
                             const PromptTemplates& templates) {
  PromptRequest req;
  req.kind = kind;
  req.instruction = request;
  ChatMessage msg;
  msg.parts.push_back(MessagePart::from_text(templates.build_gcr_prompt(req)));
  if (source.has_value()) msg.parts.push_back(MessagePart::from_image(*source));
  msg.parts.push_back(MessagePart::from_image(image));
  return parse_pointwise(judge.complete({msg}, 0.0));
}

}  // namespace

GcrTrace run_gcr(const std::string& request, const std::optional<ImageRef>& source, TaskKind kind,
                 const GcrConfig& cfg, const GatewayClient& generator, const GatewayClient& judge,
                 const PromptTemplates& templates, std::uint64_t seed) {
  cfg.validate();
  if (trim(request).empty()) throw std::invalid_argument("gcr request is empty");

  const auto start = std::chrono::steady_clock::now();
  GcrTrace trace;
  trace.initial_request = request;

  std::string current = request;
  int refinements = 0;
  while (true) {
    GcrStep step;
    step.request = current;

    GenerationRequest gen;
    gen.prompt = current;
    gen.source = source;
    gen.seed = seed + static_cast<std::uint64_t>(trace.generator_calls);
    step.image = generator.generate_image(gen).image;
    ++trace.generator_calls;

    step.assessment = critique(current, source, step.image, kind, judge, templates);
    step.decision = decide(step.assessment, cfg.threshold, &step.warning);

    if (step.decision == GcrDecision::Refine && refinements >= cfg.max_iterations) {
      // Budget exhausted: the trace records Accept so the decision invariant
      // (Refine implies another generation follows) holds.
      step.decision = GcrDecision::Accept;
      step.warning = "below threshold but iteration budget exhausted";
    }
    if (step.decision == GcrDecision::Refine) {
      if (!step.assessment.refinement.has_value() ||
          trim(step.assessment.refinement->refined_request).empty()) {
        step.decision = GcrDecision::Accept;
        step.warning = "refinement required but assessment lacks a refined request";
      } else {
        step.refined_request = step.assessment.refinement->refined_request;
      }
    }

    const bool refine = step.decision == GcrDecision::Refine;
    if (refine) current = step.refined_request;
    trace.steps.push_back(std::move(step));
    if (!refine) break;
    ++refinements;
  }

  trace.final_image = trace.steps.back().image;
  trace.total_latency_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

std::string trace_to_jsonl(const GcrTrace& trace) {
  std::string out;
  int index = 0;
  for (const auto& step : trace.steps) {
    json scores = json::object();
    for (const auto& e : step.assessment.per_aspect)
      scores[std::string(aspect_name(e.aspect))] =
          e.score.is_na() ? json(nullptr) : json(e.score.value());
    json j = {
        {"step", index++},
        {"request", step.request},
        {"scores", scores},
        {"decision", step.decision == GcrDecision::Refine ? "refine" : "accept"},
    };
    if (!step.refined_request.empty()) j["refined_request"] = step.refined_request;
    if (!step.warning.empty()) j["warning"] = step.warning;
    out += j.dump();
    out += '\n';
  }
  out += json{
      {"initial_request", trace.initial_request},
      {"steps", trace.steps.size()},
      {"generator_calls", trace.generator_calls},
      {"total_latency_s", trace.total_latency_s},
  }.dump();
  out += '\n';
  return out;
}

}  // namespace parrot
