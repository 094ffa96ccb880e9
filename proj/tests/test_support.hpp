#pragma once

#include <string>
#include <vector>

#include "parrot/rationale.hpp"
#include "parrot/util.hpp"

namespace parrot::testing {

inline const std::vector<std::string>& phrase_pool() {
  static const std::vector<std::string> pool = {
      "The edit follows the request closely",
      "Key elements are preserved with minor drift",
      "Lighting is consistent across the composition",
      "The background shows mild distortion near the subject",
      "Requested text appears but is partially garbled",
      "Object identity is maintained through the transformation",
      "Colors match the instruction with slight oversaturation",
      "No visible seams or blending artifacts",
  };
  return pool;
}

inline std::string random_phrase(Rng& rng) {
  const auto& pool = phrase_pool();
  return pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
}

// 1.00 .. 4.00 on the two-decimal grid.
inline Score random_score(Rng& rng) {
  return Score::of(static_cast<double>(rng.uniform_int(100, 400)) / 100.0);
}

inline PairwiseRationale random_pairwise(Rng& rng) {
  PairwiseRationale r;
  r.understanding = random_phrase(rng);
  for (std::size_t i = 0; i < kAllAspects.size(); ++i) {
    AspectJudgement& j = r.judgements[i];
    j.aspect = kAllAspects[i];
    j.justification = random_phrase(rng);
    const bool na = kAllAspects[i] == Aspect::TextRendering && rng.uniform() < 0.5;
    if (na) {
      j.score_a = Score::not_applicable();
      j.score_b = Score::not_applicable();
      j.winner = Winner::Tie;
    } else {
      j.score_a = random_score(rng);
      j.score_b = random_score(rng);
      if (j.score_a.value() > j.score_b.value()) j.winner = Winner::A;
      else if (j.score_b.value() > j.score_a.value()) j.winner = Winner::B;
      else j.winner = Winner::Tie;
    }
  }
  r.summary = random_phrase(rng);
  return r;
}

inline PointwiseAssessment random_pointwise(Rng& rng, bool allow_refinement = true) {
  PointwiseAssessment a;
  a.understanding = random_phrase(rng);
  for (std::size_t i = 0; i < kAllAspects.size(); ++i) {
    PointwiseEntry& e = a.per_aspect[i];
    e.aspect = kAllAspects[i];
    e.justification = random_phrase(rng);
    const bool na = kAllAspects[i] == Aspect::TextRendering && rng.uniform() < 0.5;
    e.score = na ? Score::not_applicable() : random_score(rng);
  }
  a.summary = random_phrase(rng);
  if (allow_refinement && rng.uniform() < 0.3) {
    Refinement ref;
    ref.comments = random_phrase(rng);
    ref.refined_request = random_phrase(rng);
    a.refinement = std::move(ref);
  }
  return a;
}

}  // namespace parrot::testing
