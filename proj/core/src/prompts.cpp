#include "parrot/prompts.hpp"

#include <fstream>
#include <sstream>

#include "parrot/util.hpp"
#include "template_data.inc"

namespace parrot {

namespace {

std::string read_file_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open template file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string require(const std::optional<std::string>& v, const char* field) {
  if (!v.has_value() || trim(*v).empty()) throw MissingField(field);
  return *v;
}

std::string require_nonempty(const std::string& v, const char* field) {
  if (trim(v).empty()) throw MissingField(field);
  return v;
}

// Removes the whole line containing `marker`, including its trailing newline.
std::string erase_line_containing(std::string text, std::string_view marker) {
  const std::size_t pos = text.find(marker);
  if (pos == std::string::npos) return text;
  std::size_t begin = text.rfind('\n', pos);
  begin = begin == std::string::npos ? 0 : begin + 1;
  std::size_t end = text.find('\n', pos);
  end = end == std::string::npos ? text.size() : end + 1;
  text.erase(begin, end - begin);
  return text;
}

}  // namespace

std::string render_label(Winner w) {
  switch (w) {
    case Winner::A: return "A is preferred";
    case Winner::B: return "B is preferred";
    case Winner::Tie: return "Tie";
  }
  return "";
}

PromptTemplates PromptTemplates::builtin() {
  PromptTemplates t;
  t.pairwise_editing_ = kTemplate_pairwise_editing;
  t.pairwise_t2i_ = kTemplate_pairwise_t2i;
  t.consistency_ = kTemplate_consistency;
  t.pointwise_ = kTemplate_pointwise;
  t.gcr_ = kTemplate_gcr;
  t.gcr_t2i_ = kTemplate_gcr_t2i;
  return t;
}

PromptTemplates PromptTemplates::from_dir(const std::string& dir) {
  PromptTemplates t;
  t.pairwise_editing_ = read_file_or_throw(dir + "/pairwise_editing.txt");
  t.pairwise_t2i_ = read_file_or_throw(dir + "/pairwise_t2i.txt");
  t.consistency_ = read_file_or_throw(dir + "/consistency.txt");
  t.pointwise_ = read_file_or_throw(dir + "/pointwise.txt");
  t.gcr_ = read_file_or_throw(dir + "/gcr.txt");
  t.gcr_t2i_ = read_file_or_throw(dir + "/gcr_t2i.txt");
  return t;
}

const std::string& PromptTemplates::raw(const std::string& name) const {
  if (name == "pairwise_editing") return pairwise_editing_;
  if (name == "pairwise_t2i") return pairwise_t2i_;
  if (name == "consistency") return consistency_;
  if (name == "pointwise") return pointwise_;
  if (name == "gcr") return gcr_;
  if (name == "gcr_t2i") return gcr_t2i_;
  throw std::invalid_argument("unknown template: " + name);
}

std::string PromptTemplates::build_pairwise_prompt(const PromptRequest& req) const {
  const std::string instruction = require_nonempty(req.instruction, "instruction");
  if (!req.preference_label.has_value()) throw MissingField("preference_label");
  const std::string& tpl =
      req.kind == TaskKind::ImageEditing ? pairwise_editing_ : pairwise_t2i_;
  std::string out = replace_all(tpl, "{instruction}", instruction);
  out = replace_all(std::move(out), "{label}", render_label(*req.preference_label));
  return out;
}

std::string PromptTemplates::build_consistency_prompt(const PromptRequest& req) const {
  const std::string instruction = require_nonempty(req.instruction, "instruction");
  const std::string rationale = require(req.rationale_text, "rationale_text");
  std::string out = replace_all(consistency_, "{instruction}", instruction);
  out = replace_all(std::move(out), "{rationale_z}", rationale);
  return out;
}

std::string PromptTemplates::build_pointwise_prompt(const PromptRequest& req) const {
  const std::string instruction = require_nonempty(req.instruction, "instruction");
  const std::string image_label = require(req.image_label, "image_label");
  const std::string reference = require(req.reference_comment, "reference_comment");
  std::string out = replace_all(pointwise_, "{instruction}", instruction);
  out = replace_all(std::move(out), "{image_label}", image_label);
  out = replace_all(std::move(out), "{reference_comment}", reference);
  return out;
}

std::string PromptTemplates::build_gcr_prompt(const PromptRequest& req) const {
  const std::string instruction = require_nonempty(req.instruction, "instruction");
  const std::string& tpl = req.kind == TaskKind::ImageEditing ? gcr_ : gcr_t2i_;
  return replace_all(tpl, "{instruction}", instruction);
}

std::string PromptTemplates::build_foresight_prompt(const PromptRequest& req) const {
  // Built through the anchored template so the two stay in lockstep; the
  // label value is irrelevant because its line is removed afterwards.
  PromptRequest anchored = req;
  if (!anchored.preference_label.has_value()) anchored.preference_label = Winner::A;
  return erase_line_containing(build_pairwise_prompt(anchored), kAnchorPrefix);
}

std::string PromptTemplates::build_pointwise_student_prompt(const PromptRequest& req) const {
  const std::string instruction = require_nonempty(req.instruction, "instruction");
  const std::string image_label = require(req.image_label, "image_label");
  std::string tpl = pointwise_;
  tpl = erase_line_containing(std::move(tpl), "The reference comment above");
  tpl = erase_line_containing(std::move(tpl), "Here is a relevant comment");
  tpl = erase_line_containing(std::move(tpl), "{reference_comment}");
  tpl = erase_line_containing(std::move(tpl), "The relevant comment is a hint");
  std::string out = replace_all(std::move(tpl), "{instruction}", instruction);
  out = replace_all(std::move(out), "{image_label}", image_label);
  return out;
}

}  // namespace parrot
