#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "parrot/rationale.hpp"

namespace parrot {

enum class TaskKind { ImageEditing, TextToImage };

struct MissingField : std::runtime_error {
  explicit MissingField(const std::string& field)
      : std::runtime_error("missing required field: " + field) {}
};

struct PromptRequest {
  TaskKind kind = TaskKind::ImageEditing;
  std::string instruction;
  std::optional<Winner> preference_label;        // pairwise anchoring; never Tie in Phase 1
  std::optional<std::string> rationale_text;     // consistency check
  std::optional<std::string> image_label;        // "Edited Image A" / "Edited Image B"
  std::optional<std::string> reference_comment;  // pointwise hint
};

// Renders a preference label with the consistency-answer vocabulary so both
// phases share one surface form.
std::string render_label(Winner w);

// The template assets, loaded either from the compiled-in copies or from a
// directory of plain-text files with {placeholder} markers.
class PromptTemplates {
 public:
  static PromptTemplates builtin();
  static PromptTemplates from_dir(const std::string& dir);

  std::string build_pairwise_prompt(const PromptRequest& req) const;
  std::string build_consistency_prompt(const PromptRequest& req) const;
  std::string build_pointwise_prompt(const PromptRequest& req) const;
  std::string build_gcr_prompt(const PromptRequest& req) const;

  // The pairwise template with the anchor line removed and nothing else:
  // the label-free input an SFT student sees.
  std::string build_foresight_prompt(const PromptRequest& req) const;

  // The pointwise template with the reference-comment scaffolding removed:
  // the hint-free input an SFT student sees.
  std::string build_pointwise_student_prompt(const PromptRequest& req) const;

  const std::string& raw(const std::string& name) const;

 private:
  std::string pairwise_editing_;
  std::string pairwise_t2i_;
  std::string consistency_;
  std::string pointwise_;
  std::string gcr_;
  std::string gcr_t2i_;
};

// The literal anchor prefix; consistency and foresight prompts must never
// contain it.
inline constexpr std::string_view kAnchorPrefix = "Hint: human preference is:";

}  // namespace parrot
