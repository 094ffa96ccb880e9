#include "parrot/rationale.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "parrot/util.hpp"

namespace parrot {

std::string_view aspect_name(Aspect a) {
  switch (a) {
    case Aspect::TextFaithfulness: return "Text Faithfulness";
    case Aspect::ImageFaithfulness: return "Image Faithfulness";
    case Aspect::PhysicalVisualQuality: return "Physical and Visual Quality";
    case Aspect::TextRendering: return "Text Rendering";
  }
  return "";
}

std::string_view winner_name(Winner w) {
  switch (w) {
    case Winner::A: return "A";
    case Winner::B: return "B";
    case Winner::Tie: return "Tie";
  }
  return "";
}

Score Score::of(double value) {
  const double rounded = std::round(value * 100.0) / 100.0;
  if (!(rounded >= 1.0 && rounded <= 4.0)) throw ScoreOutOfRange(value);
  Score s;
  s.value_ = rounded;
  return s;
}

std::string Score::text() const {
  if (is_na()) return "N/A";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *value_);
  std::string s(buf);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

MalformedRationale::MalformedRationale(const std::string& reason, std::size_t byte_offset)
    : std::runtime_error(reason + " (byte offset " + std::to_string(byte_offset) + ")"),
      offset(byte_offset) {}

ScoreOutOfRange::ScoreOutOfRange(double v)
    : std::runtime_error("score outside [1,4]: " + std::to_string(v)), value(v) {}

AmbiguousAnswer::AmbiguousAnswer(const std::string& reply)
    : std::runtime_error("ambiguous consistency answer: \"" + reply + "\"") {}

namespace {

constexpr std::string_view kJudgementHeader = "# Detailed Judgement";
constexpr std::string_view kSummaryHeader = "# Summary:";
constexpr std::string_view kRefinementHeader = "# User Request Refinement:";

std::string strip_brackets(std::string s) {
  std::string t = trim(s);
  if (t.size() >= 2 && t.front() == '[' && t.back() == ']') t = trim(t.substr(1, t.size() - 2));
  return t;
}

Score parse_score_token(std::string_view token, std::size_t offset) {
  const std::string t = strip_brackets(std::string(token));
  if (to_lower(t) == "n/a" || to_lower(t) == "na") return Score::not_applicable();
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) {
    throw MalformedRationale("unparseable score \"" + t + "\"", offset);
  }
  return Score::of(v);  // throws ScoreOutOfRange when outside [1,4]
}

Winner parse_winner_token(std::string_view token, std::size_t offset) {
  const std::string t = to_lower(strip_brackets(std::string(token)));
  if (t == "a") return Winner::A;
  if (t == "b") return Winner::B;
  if (t == "tie") return Winner::Tie;
  throw MalformedRationale("unparseable winner \"" + std::string(token) + "\"", offset);
}

std::string aspect_header(int index, Aspect a) {
  return std::to_string(index + 1) + ". " + std::string(aspect_name(a)) + ":";
}

// Finds a header tolerant of case/whitespace; throws when required.
std::size_t find_required(std::string_view raw, std::string_view needle, std::size_t from,
                          std::size_t limit, const char* what) {
  const std::size_t pos = find_tolerant(raw, needle, from);
  if (pos == std::string_view::npos || pos >= limit) {
    throw MalformedRationale(std::string("missing header \"") + what + "\"", from);
  }
  return pos;
}

// Text between the end of a header match and the next boundary, trimmed.
std::string capture(std::string_view raw, std::size_t begin, std::size_t end) {
  return trim(raw.substr(begin, end - begin));
}

// First line (up to '\n' or boundary) after a header, used for short tokens.
std::string_view token_span(std::string_view raw, std::size_t begin, std::size_t limit) {
  std::size_t end = raw.find('\n', begin);
  if (end == std::string_view::npos || end > limit) end = limit;
  return raw.substr(begin, end - begin);
}

struct BlockBounds {
  std::size_t header_end;  // npos when the block is absent
  std::size_t end;         // start of the next block/section
};

}  // namespace

PairwiseRationale parse_pairwise(std::string_view raw) {
  PairwiseRationale out;

  const std::size_t judgement_pos =
      find_required(raw, kJudgementHeader, 0, raw.size(), "# Detailed Judgement");
  out.understanding = capture(raw, 0, judgement_pos);
  std::size_t cursor = tolerant_match_end(raw, kJudgementHeader, judgement_pos);

  const std::size_t summary_pos = find_tolerant(raw, kSummaryHeader, cursor);
  const std::size_t body_end = summary_pos == std::string_view::npos ? raw.size() : summary_pos;

  // Locate all four aspect headers first so each block's extent is known.
  std::array<BlockBounds, 4> blocks{};
  std::size_t scan = cursor;
  for (int i = 0; i < 4; ++i) {
    const Aspect a = kAllAspects[static_cast<std::size_t>(i)];
    const std::string header = aspect_header(i, a);
    const std::size_t pos = find_tolerant(raw, header, scan);
    if (pos == std::string_view::npos || pos >= body_end) {
      if (a == Aspect::TextRendering) {
        blocks[static_cast<std::size_t>(i)] = {std::string_view::npos, body_end};
        continue;
      }
      throw MalformedRationale("missing aspect block \"" + header + "\"", scan);
    }
    blocks[static_cast<std::size_t>(i)].header_end = tolerant_match_end(raw, header, pos);
    if (i > 0 && blocks[static_cast<std::size_t>(i - 1)].header_end != std::string_view::npos) {
      blocks[static_cast<std::size_t>(i - 1)].end = pos;
    }
    scan = blocks[static_cast<std::size_t>(i)].header_end;
  }
  for (int i = 0; i < 4; ++i) {
    auto& b = blocks[static_cast<std::size_t>(i)];
    if (b.header_end != std::string_view::npos && (i == 3 || b.end == 0)) b.end = body_end;
  }

  for (int i = 0; i < 4; ++i) {
    const Aspect a = kAllAspects[static_cast<std::size_t>(i)];
    AspectJudgement j;
    j.aspect = a;
    const auto& b = blocks[static_cast<std::size_t>(i)];
    if (b.header_end == std::string_view::npos) {
      // Conditional aspect absent from the model output: N/A with empty
      // justification, winner recorded as Tie.
      j.score_a = Score::not_applicable();
      j.score_b = Score::not_applicable();
      j.winner = Winner::Tie;
      out.judgements[static_cast<std::size_t>(i)] = j;
      continue;
    }

    const std::size_t just_pos =
        find_required(raw, "## Justification:", b.header_end, b.end, "## Justification:");
    const std::size_t just_end = tolerant_match_end(raw, "## Justification:", just_pos);
    const std::size_t sa_pos = find_required(raw, "## Score A:", just_end, b.end, "## Score A:");
    j.justification = capture(raw, just_end, sa_pos);

    const std::size_t sa_end = tolerant_match_end(raw, "## Score A:", sa_pos);
    const std::size_t sb_pos = find_required(raw, "## Score B:", sa_end, b.end, "## Score B:");
    j.score_a = parse_score_token(raw.substr(sa_end, sb_pos - sa_end), sa_end);

    const std::size_t sb_end = tolerant_match_end(raw, "## Score B:", sb_pos);
    const std::size_t w_pos = find_required(raw, "## Winner:", sb_end, b.end, "## Winner:");
    j.score_b = parse_score_token(raw.substr(sb_end, w_pos - sb_end), sb_end);

    const std::size_t w_end = tolerant_match_end(raw, "## Winner:", w_pos);
    j.winner = parse_winner_token(token_span(raw, w_end, b.end), w_end);

    out.judgements[static_cast<std::size_t>(i)] = j;
  }

  if (summary_pos == std::string_view::npos) {
    throw MalformedRationale("missing header \"# Summary:\"", cursor);
  }
  out.summary = capture(raw, tolerant_match_end(raw, kSummaryHeader, summary_pos), raw.size());
  if (out.summary.empty()) {
    throw MalformedRationale("empty summary", summary_pos);
  }
  return out;
}

PointwiseAssessment parse_pointwise(std::string_view raw) {
  PointwiseAssessment out;

  const std::size_t judgement_pos =
      find_required(raw, kJudgementHeader, 0, raw.size(), "# Detailed Judgement");
  out.understanding = capture(raw, 0, judgement_pos);
  std::size_t cursor = tolerant_match_end(raw, kJudgementHeader, judgement_pos);

  const std::size_t summary_pos = find_tolerant(raw, kSummaryHeader, cursor);
  const std::size_t body_end = summary_pos == std::string_view::npos ? raw.size() : summary_pos;

  std::array<BlockBounds, 4> blocks{};
  std::size_t scan = cursor;
  for (int i = 0; i < 4; ++i) {
    const Aspect a = kAllAspects[static_cast<std::size_t>(i)];
    const std::string header = aspect_header(i, a);
    const std::size_t pos = find_tolerant(raw, header, scan);
    if (pos == std::string_view::npos || pos >= body_end) {
      if (a == Aspect::TextRendering) {
        blocks[static_cast<std::size_t>(i)] = {std::string_view::npos, body_end};
        continue;
      }
      throw MalformedRationale("missing aspect block \"" + header + "\"", scan);
    }
    blocks[static_cast<std::size_t>(i)].header_end = tolerant_match_end(raw, header, pos);
    if (i > 0 && blocks[static_cast<std::size_t>(i - 1)].header_end != std::string_view::npos) {
      blocks[static_cast<std::size_t>(i - 1)].end = pos;
    }
    scan = blocks[static_cast<std::size_t>(i)].header_end;
  }
  for (int i = 0; i < 4; ++i) {
    auto& b = blocks[static_cast<std::size_t>(i)];
    if (b.header_end != std::string_view::npos && (i == 3 || b.end == 0)) b.end = body_end;
  }

  for (int i = 0; i < 4; ++i) {
    const Aspect a = kAllAspects[static_cast<std::size_t>(i)];
    PointwiseEntry e;
    e.aspect = a;
    const auto& b = blocks[static_cast<std::size_t>(i)];
    if (b.header_end == std::string_view::npos) {
      e.score = Score::not_applicable();
      out.per_aspect[static_cast<std::size_t>(i)] = e;
      continue;
    }
    const std::size_t s_pos = find_required(raw, "## Score:", b.header_end, b.end, "## Score:");
    const std::size_t s_end = tolerant_match_end(raw, "## Score:", s_pos);
    const std::size_t just_pos =
        find_required(raw, "## Justification:", s_end, b.end, "## Justification:");
    e.score = parse_score_token(raw.substr(s_end, just_pos - s_end), s_end);
    const std::size_t just_end = tolerant_match_end(raw, "## Justification:", just_pos);
    e.justification = capture(raw, just_end, b.end);
    out.per_aspect[static_cast<std::size_t>(i)] = e;
  }

  if (summary_pos == std::string_view::npos) {
    throw MalformedRationale("missing header \"# Summary:\"", cursor);
  }
  const std::size_t summary_end = tolerant_match_end(raw, kSummaryHeader, summary_pos);

  const std::size_t refine_pos = find_tolerant(raw, kRefinementHeader, summary_end);
  if (refine_pos == std::string_view::npos) {
    out.summary = capture(raw, summary_end, raw.size());
  } else {
    out.summary = capture(raw, summary_end, refine_pos);
    Refinement ref;
    const std::size_t rc_pos = find_required(raw, "## Refinement Comments:", refine_pos, raw.size(),
                                             "## Refinement Comments:");
    const std::size_t rc_end = tolerant_match_end(raw, "## Refinement Comments:", rc_pos);
    const std::size_t rr_pos =
        find_required(raw, "## Refined Request:", rc_end, raw.size(), "## Refined Request:");
    ref.comments = capture(raw, rc_end, rr_pos);
    const std::size_t rr_end = tolerant_match_end(raw, "## Refined Request:", rr_pos);
    ref.refined_request = capture(raw, rr_end, raw.size());
    out.refinement = std::move(ref);
  }
  if (out.summary.empty()) {
    throw MalformedRationale("empty summary", summary_pos);
  }
  return out;
}

ConsistencyAnswer parse_consistency_answer(std::string_view raw) {
  static constexpr std::array<std::pair<std::string_view, ConsistencyAnswer>, 3> kAnswers = {{
      {"a is preferred", ConsistencyAnswer::APreferred},
      {"b is preferred", ConsistencyAnswer::BPreferred},
      {"tie", ConsistencyAnswer::Tie},
  }};

  std::string t = trim(raw);
  while (t.size() >= 2 && (t.front() == '"' || t.front() == '\'' || t.front() == '`') &&
         t.back() == t.front()) {
    t = trim(t.substr(1, t.size() - 2));
  }
  const std::string lowered = to_lower(t);
  for (const auto& [text, answer] : kAnswers) {
    if (lowered == text) return answer;
  }

  // Fallback: unique-substring search over the whole reply.
  std::optional<ConsistencyAnswer> found;
  for (const auto& [text, answer] : kAnswers) {
    if (lowered.find(text) != std::string::npos) {
      if (found.has_value()) throw AmbiguousAnswer(std::string(raw));
      found = answer;
    }
  }
  if (!found.has_value()) throw AmbiguousAnswer(std::string(raw));
  return *found;
}

std::string emit_pairwise(const PairwiseRationale& r) {
  std::string out;
  out += r.understanding;
  out += "\n# Detailed Judgement\n";
  for (int i = 0; i < 4; ++i) {
    const auto& j = r.judgements[static_cast<std::size_t>(i)];
    out += aspect_header(i, j.aspect);
    out += "\n## Justification: ";
    out += j.justification;
    out += "\n## Score A: " + j.score_a.text() + " ## Score B: " + j.score_b.text() +
           " ## Winner: " + std::string(winner_name(j.winner)) + "\n";
  }
  out += "# Summary: ";
  out += r.summary;
  out += "\n";
  return out;
}

std::string emit_pointwise(const PointwiseAssessment& a) {
  std::string out;
  out += a.understanding;
  out += "\n# Detailed Judgement\n";
  for (int i = 0; i < 4; ++i) {
    const auto& e = a.per_aspect[static_cast<std::size_t>(i)];
    out += aspect_header(i, e.aspect);
    out += "\n## Score: " + e.score.text() + "\n## Justification: ";
    out += e.justification;
    out += "\n";
  }
  out += "# Summary: ";
  out += a.summary;
  out += "\n";
  if (a.refinement.has_value()) {
    out += "# User Request Refinement:\n## Refinement Comments: ";
    out += a.refinement->comments;
    out += "\n## Refined Request: ";
    out += a.refinement->refined_request;
    out += "\n";
  }
  return out;
}

std::vector<Contradiction> lint_rationale(const PairwiseRationale& r) {
  std::vector<Contradiction> out;
  for (const auto& j : r.judgements) {
    if (j.score_a.is_na() || j.score_b.is_na()) continue;
    const double a = j.score_a.value();
    const double b = j.score_b.value();
    if (a > b && j.winner != Winner::A) {
      out.push_back({j.aspect, "Score A " + j.score_a.text() + " > Score B " + j.score_b.text() +
                                   " but winner is " + std::string(winner_name(j.winner))});
    } else if (b > a && j.winner != Winner::B) {
      out.push_back({j.aspect, "Score B " + j.score_b.text() + " > Score A " + j.score_a.text() +
                                   " but winner is " + std::string(winner_name(j.winner))});
    }
  }
  return out;
}

}  // namespace parrot
