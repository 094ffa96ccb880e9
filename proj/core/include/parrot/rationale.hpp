#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace parrot {

// The four assessment dimensions, in the canonical order used by every
// template and parsed block.
enum class Aspect { TextFaithfulness, ImageFaithfulness, PhysicalVisualQuality, TextRendering };

inline constexpr std::array<Aspect, 4> kAllAspects = {
    Aspect::TextFaithfulness, Aspect::ImageFaithfulness, Aspect::PhysicalVisualQuality,
    Aspect::TextRendering};

std::string_view aspect_name(Aspect a);

// A 1..4 score or the N/A sentinel. Numeric values are canonicalized to two
// decimal places on construction so parse/emit round-trips are exact.
class Score {
 public:
  Score() = default;  // N/A
  static Score not_applicable() { return Score(); }
  static Score of(double value);

  bool is_na() const { return !value_.has_value(); }
  double value() const { return value_.value(); }
  std::optional<double> maybe() const { return value_; }

  // Shortest decimal form with at most two places, e.g. "3", "3.5", "3.25".
  std::string text() const;

  friend bool operator==(const Score&, const Score&) = default;

 private:
  std::optional<double> value_;
};

enum class Winner { A, B, Tie };

std::string_view winner_name(Winner w);

struct AspectJudgement {
  Aspect aspect = Aspect::TextFaithfulness;
  std::string justification;
  Score score_a;
  Score score_b;
  Winner winner = Winner::Tie;

  friend bool operator==(const AspectJudgement&, const AspectJudgement&) = default;
};

struct PairwiseRationale {
  std::string understanding;
  std::array<AspectJudgement, 4> judgements;  // canonical aspect order
  std::string summary;

  friend bool operator==(const PairwiseRationale&, const PairwiseRationale&) = default;
};

struct PointwiseEntry {
  Aspect aspect = Aspect::TextFaithfulness;
  Score score;
  std::string justification;

  friend bool operator==(const PointwiseEntry&, const PointwiseEntry&) = default;
};

struct Refinement {
  std::string comments;
  std::string refined_request;

  friend bool operator==(const Refinement&, const Refinement&) = default;
};

struct PointwiseAssessment {
  std::string understanding;
  std::array<PointwiseEntry, 4> per_aspect;  // canonical aspect order
  std::string summary;
  std::optional<Refinement> refinement;

  friend bool operator==(const PointwiseAssessment&, const PointwiseAssessment&) = default;
};

enum class ConsistencyAnswer { APreferred, BPreferred, Tie };

struct MalformedRationale : std::runtime_error {
  MalformedRationale(const std::string& reason, std::size_t byte_offset);
  std::size_t offset;
};

struct ScoreOutOfRange : std::runtime_error {
  explicit ScoreOutOfRange(double value);
  double value;
};

struct AmbiguousAnswer : std::runtime_error {
  explicit AmbiguousAnswer(const std::string& reply);
};

PairwiseRationale parse_pairwise(std::string_view raw);
PointwiseAssessment parse_pointwise(std::string_view raw);
ConsistencyAnswer parse_consistency_answer(std::string_view raw);

std::string emit_pairwise(const PairwiseRationale& r);
std::string emit_pointwise(const PointwiseAssessment& a);

struct Contradiction {
  Aspect aspect;
  std::string description;
};

// Flags aspects whose numeric scores strictly order A vs B but whose declared
// winner disagrees. Equal scores never contradict.
std::vector<Contradiction> lint_rationale(const PairwiseRationale& r);

}  // namespace parrot
