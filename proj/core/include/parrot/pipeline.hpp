#pragma once

#include <optional>
#include <string>
#include <vector>

#include "parrot/gateway.hpp"
#include "parrot/prompts.hpp"
#include "parrot/rationale.hpp"

namespace parrot {

// One comparison: two candidate images for the same instruction, plus the
// source image when the task is editing.
struct ComparisonTuple {
  std::string id;
  TaskKind kind = TaskKind::ImageEditing;
  std::string instruction;
  std::optional<ImageRef> source;
  ImageRef image_a;
  ImageRef image_b;
};

// Anchoring label; Tie pairs never enter Phase 1.
struct PreferenceLabel {
  Winner y = Winner::A;

  static PreferenceLabel from_winner(Winner w) {
    if (w == Winner::Tie) throw std::invalid_argument("preference label may not be Tie");
    return PreferenceLabel{w};
  }
};

struct LabeledPair {
  ComparisonTuple tuple;
  PreferenceLabel label;
};

enum class ConsistencyState { Unset, Passed, Failed, Malformed };

std::string_view consistency_name(ConsistencyState s);

struct RationalizedSample {
  ComparisonTuple tuple;
  PreferenceLabel label;
  PairwiseRationale rationale;
  ConsistencyState consistency = ConsistencyState::Unset;
  std::string detail;  // malformed reason or predicted answer
};

struct FailureRecord {
  std::string id;
  std::string phase;
  std::string reason;
};

struct PipelineStats {
  std::size_t generated = 0;
  std::size_t malformed = 0;
  std::size_t passed = 0;
  std::size_t failed = 0;

  double retention() const {
    return generated == 0 ? 0.0 : static_cast<double>(passed) / static_cast<double>(generated);
  }
};

struct PointwiseProjection {
  std::string tuple_id;
  std::string image_label;  // "Edited Image A" / "Edited Image B"
  PointwiseAssessment assessment;
};

struct SftRecord {
  std::string kind;  // "pairwise" | "pointwise"
  std::string prompt;
  std::string target;
  std::string tuple_id;
  std::string image_label;  // pointwise only
};

// JSONL I/O. Input lines carry {id, kind, instruction, source?, image_a,
// image_b, label}; images are paths or data URLs.
std::vector<LabeledPair> load_pairs(const std::string& path);
std::vector<LabeledPair> parse_pairs_jsonl(const std::string& text);
void write_failures(const std::string& path, const std::vector<FailureRecord>& failures);

// Anchored rationale generation. Gateway errors become failure records; the
// batch never aborts on one item. Malformed teacher replies are kept and
// marked, not dropped.
std::vector<RationalizedSample> phase1_generate(const std::vector<LabeledPair>& pairs,
                                                const GatewayClient& teacher,
                                                const PromptTemplates& templates,
                                                std::vector<FailureRecord>& failures);

// Predictive-consistency filter at temperature 0. Retains a sample only when
// the label-free answer recovers the anchor label; Tie answers fail.
std::pair<std::vector<RationalizedSample>, PipelineStats> phase2_filter(
    std::vector<RationalizedSample> samples, const GatewayClient& teacher,
    const PromptTemplates& templates, std::vector<FailureRecord>& failures);

// Two pointwise assessments per retained sample, one per image, with the
// validated pairwise rationale as the reference comment.
std::vector<PointwiseProjection> project_pointwise(
    const std::vector<RationalizedSample>& retained, const GatewayClient& teacher,
    const PromptTemplates& templates, std::vector<FailureRecord>& failures);

std::vector<SftRecord> make_sft_records(const std::vector<RationalizedSample>& retained,
                                        const std::vector<PointwiseProjection>& projections,
                                        const PromptTemplates& templates);

// Writes the pairwise and pointwise dataset files; outputs are sorted by
// (tuple id, image label) so reruns are bytewise identical. Partial files are
// cleaned up on error.
void emit_sft(const std::vector<RationalizedSample>& retained,
              const std::vector<PointwiseProjection>& projections,
              const PromptTemplates& templates, const std::string& pairwise_path,
              const std::string& pointwise_path);

// Serialization used by both emit_sft and the CLI phase outputs.
std::string sample_to_json(const RationalizedSample& s);
RationalizedSample sample_from_json(const std::string& line);
std::string projection_to_json(const PointwiseProjection& p);
PointwiseProjection projection_from_json(const std::string& line);
std::string sft_record_to_json(const SftRecord& r);

}  // namespace parrot
