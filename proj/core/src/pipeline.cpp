#include "parrot/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "parrot/util.hpp"

namespace parrot {

using nlohmann::json;

namespace {

std::string kind_name(TaskKind k) {
  return k == TaskKind::ImageEditing ? "editing" : "t2i";
}

TaskKind kind_from(const std::string& s) {
  const std::string k = to_lower(trim(s));
  if (k == "editing" || k == "image_editing") return TaskKind::ImageEditing;
  if (k == "t2i" || k == "text_to_image") return TaskKind::TextToImage;
  throw std::invalid_argument("unknown task kind: " + s);
}

std::string image_to_string(const ImageRef& r) {
  if (r.kind == ImageRef::Kind::Inline) return r.to_data_url();
  return r.location;
}

json image_to_json(const std::optional<ImageRef>& r) {
  if (!r.has_value()) return nullptr;
  return image_to_string(*r);
}

json tuple_to_json(const ComparisonTuple& t) {
  json j = {
      {"id", t.id},
      {"kind", kind_name(t.kind)},
      {"instruction", t.instruction},
      {"image_a", image_to_string(t.image_a)},
      {"image_b", image_to_string(t.image_b)},
  };
  if (t.source.has_value()) j["source"] = image_to_string(*t.source);
  return j;
}

ComparisonTuple tuple_from_json(const json& j) {
  ComparisonTuple t;
  t.id = j.at("id").get<std::string>();
  t.kind = kind_from(j.at("kind").get<std::string>());
  t.instruction = j.at("instruction").get<std::string>();
  if (j.contains("source") && !j["source"].is_null())
    t.source = ImageRef::from_string(j["source"].get<std::string>());
  t.image_a = ImageRef::from_string(j.at("image_a").get<std::string>());
  t.image_b = ImageRef::from_string(j.at("image_b").get<std::string>());
  if (t.kind == TaskKind::ImageEditing && !t.source.has_value())
    throw std::invalid_argument("editing tuple " + t.id + " has no source image");
  if (image_to_string(t.image_a) == image_to_string(t.image_b))
    throw std::invalid_argument("tuple " + t.id + " compares an image against itself");
  return t;
}

Winner winner_from(const std::string& s) {
  const std::string w = to_lower(trim(s));
  if (w == "a") return Winner::A;
  if (w == "b") return Winner::B;
  if (w == "tie") return Winner::Tie;
  throw std::invalid_argument("unknown label: " + s);
}

// Fans items out over a small worker pool; each item writes only its own
// slot, so the merge is a no-op and ordering stays deterministic.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const int pool = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (pool == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(pool));
  for (int w = 0; w < pool; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

std::vector<ChatMessage> prompt_with_images(std::string text,
                                            const std::vector<const ImageRef*>& images) {
  ChatMessage m;
  m.role = "user";
  m.parts.push_back(MessagePart::from_text(std::move(text)));
  for (const ImageRef* img : images) m.parts.push_back(MessagePart::from_image(*img));
  return {std::move(m)};
}

std::vector<const ImageRef*> tuple_images(const ComparisonTuple& t) {
  std::vector<const ImageRef*> images;
  if (t.source.has_value()) images.push_back(&*t.source);
  images.push_back(&t.image_a);
  images.push_back(&t.image_b);
  return images;
}

json scores_pairwise(const PairwiseRationale& r) {
  json scores = json::object();
  for (const auto& jgt : r.judgements) {
    scores[std::string(aspect_name(jgt.aspect))] = {
        {"a", jgt.score_a.is_na() ? json(nullptr) : json(jgt.score_a.value())},
        {"b", jgt.score_b.is_na() ? json(nullptr) : json(jgt.score_b.value())},
        {"winner", std::string(winner_name(jgt.winner))},
    };
  }
  return scores;
}

json scores_pointwise(const PointwiseAssessment& a) {
  json scores = json::object();
  for (const auto& e : a.per_aspect)
    scores[std::string(aspect_name(e.aspect))] =
        e.score.is_na() ? json(nullptr) : json(e.score.value());
  return scores;
}

// Writes lines to `path` through a temp file so a failed run leaves nothing
// half-written behind.
void write_lines_atomic(const std::string& path, const std::vector<std::string>& lines) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    for (const auto& line : lines) out << line << '\n';
    out.flush();
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw std::runtime_error("write failed: " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw std::runtime_error("rename failed: " + path + ": " + ec.message());
  }
}

}  // namespace

std::string_view consistency_name(ConsistencyState s) {
  switch (s) {
    case ConsistencyState::Unset: return "unset";
    case ConsistencyState::Passed: return "passed";
    case ConsistencyState::Failed: return "failed";
    case ConsistencyState::Malformed: return "malformed";
  }
  return "unset";
}

std::vector<LabeledPair> parse_pairs_jsonl(const std::string& text) {
  std::vector<LabeledPair> pairs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      LabeledPair p;
      p.tuple = tuple_from_json(j);
      p.label = PreferenceLabel::from_winner(winner_from(j.at("label").get<std::string>()));
      pairs.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

std::vector<LabeledPair> load_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pairs_jsonl(ss.str());
}

void write_failures(const std::string& path, const std::vector<FailureRecord>& failures) {
  std::vector<std::string> lines;
  lines.reserve(failures.size());
  for (const auto& f : failures)
    lines.push_back(json{{"id", f.id}, {"phase", f.phase}, {"reason", f.reason}}.dump());
  write_lines_atomic(path, lines);
}

std::vector<RationalizedSample> phase1_generate(const std::vector<LabeledPair>& pairs,
                                                const GatewayClient& teacher,
                                                const PromptTemplates& templates,
                                                std::vector<FailureRecord>& failures) {
  std::vector<std::optional<RationalizedSample>> slots(pairs.size());
  std::vector<std::optional<FailureRecord>> item_failures(pairs.size());

  parallel_for(pairs.size(), teacher.config().max_inflight, [&](std::size_t i) {
    const LabeledPair& pair = pairs[i];
    PromptRequest req;
    req.kind = pair.tuple.kind;
    req.instruction = pair.tuple.instruction;
    req.preference_label = pair.label.y;
    try {
      const std::string prompt = templates.build_pairwise_prompt(req);
      const std::string reply =
          teacher.complete(prompt_with_images(prompt, tuple_images(pair.tuple)));
      RationalizedSample sample;
      sample.tuple = pair.tuple;
      sample.label = pair.label;
      try {
        sample.rationale = parse_pairwise(reply);
      } catch (const MalformedRationale& e) {
        sample.consistency = ConsistencyState::Malformed;
        sample.detail = e.what();
      } catch (const ScoreOutOfRange& e) {
        sample.consistency = ConsistencyState::Malformed;
        sample.detail = e.what();
      }
      slots[i] = std::move(sample);
    } catch (const GatewayError& e) {
      item_failures[i] = FailureRecord{pair.tuple.id, "phase1", e.what()};
    }
  });

  std::vector<RationalizedSample> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (slots[i].has_value()) out.push_back(std::move(*slots[i]));
    if (item_failures[i].has_value()) failures.push_back(std::move(*item_failures[i]));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.tuple.id < b.tuple.id; });
  return out;
}

std::pair<std::vector<RationalizedSample>, PipelineStats> phase2_filter(
    std::vector<RationalizedSample> samples, const GatewayClient& teacher,
    const PromptTemplates& templates, std::vector<FailureRecord>& failures) {
  std::vector<std::optional<FailureRecord>> item_failures(samples.size());

  parallel_for(samples.size(), teacher.config().max_inflight, [&](std::size_t i) {
    RationalizedSample& sample = samples[i];
    if (sample.consistency == ConsistencyState::Malformed) return;
    PromptRequest req;
    req.kind = sample.tuple.kind;
    req.instruction = sample.tuple.instruction;
    req.rationale_text = emit_pairwise(sample.rationale);
    try {
      const std::string prompt = templates.build_consistency_prompt(req);
      const std::string reply =
          teacher.complete(prompt_with_images(prompt, tuple_images(sample.tuple)), 0.0);
      try {
        const ConsistencyAnswer answer = parse_consistency_answer(reply);
        const bool agrees = (answer == ConsistencyAnswer::APreferred && sample.label.y == Winner::A) ||
                            (answer == ConsistencyAnswer::BPreferred && sample.label.y == Winner::B);
        sample.consistency = agrees ? ConsistencyState::Passed : ConsistencyState::Failed;
        sample.detail = trim(reply);
      } catch (const AmbiguousAnswer& e) {
        sample.consistency = ConsistencyState::Failed;
        sample.detail = e.what();
      }
    } catch (const GatewayError& e) {
      sample.consistency = ConsistencyState::Failed;
      sample.detail = e.what();
      item_failures[i] = FailureRecord{sample.tuple.id, "phase2", e.what()};
    }
  });

  for (auto& f : item_failures)
    if (f.has_value()) failures.push_back(std::move(*f));

  PipelineStats stats;
  stats.generated = samples.size();
  std::vector<RationalizedSample> retained;
  for (auto& s : samples) {
    switch (s.consistency) {
      case ConsistencyState::Passed:
        ++stats.passed;
        retained.push_back(std::move(s));
        break;
      case ConsistencyState::Failed: ++stats.failed; break;
      case ConsistencyState::Malformed: ++stats.malformed; break;
      case ConsistencyState::Unset:
        throw std::logic_error("phase2 left a sample unset");
    }
  }
  return {std::move(retained), stats};
}

std::vector<PointwiseProjection> project_pointwise(
    const std::vector<RationalizedSample>& retained, const GatewayClient& teacher,
    const PromptTemplates& templates, std::vector<FailureRecord>& failures) {
  struct Job {
    const RationalizedSample* sample;
    const ImageRef* image;
    std::string image_label;
  };
  std::vector<Job> jobs;
  jobs.reserve(retained.size() * 2);
  for (const auto& s : retained) {
    jobs.push_back({&s, &s.tuple.image_a, "Edited Image A"});
    jobs.push_back({&s, &s.tuple.image_b, "Edited Image B"});
  }

  std::vector<std::optional<PointwiseProjection>> slots(jobs.size());
  std::vector<std::optional<FailureRecord>> item_failures(jobs.size());

  parallel_for(jobs.size(), teacher.config().max_inflight, [&](std::size_t i) {
    const Job& job = jobs[i];
    PromptRequest req;
    req.kind = job.sample->tuple.kind;
    req.instruction = job.sample->tuple.instruction;
    req.image_label = job.image_label;
    req.reference_comment = emit_pairwise(job.sample->rationale);
    std::vector<const ImageRef*> images;
    if (job.sample->tuple.source.has_value()) images.push_back(&*job.sample->tuple.source);
    images.push_back(job.image);
    try {
      const std::string prompt = templates.build_pointwise_prompt(req);
      const std::string reply = teacher.complete(prompt_with_images(prompt, images));
      try {
        slots[i] = PointwiseProjection{job.sample->tuple.id, job.image_label,
                                       parse_pointwise(reply)};
      } catch (const MalformedRationale& e) {
        item_failures[i] =
            FailureRecord{job.sample->tuple.id + "/" + job.image_label, "project", e.what()};
      } catch (const ScoreOutOfRange& e) {
        item_failures[i] =
            FailureRecord{job.sample->tuple.id + "/" + job.image_label, "project", e.what()};
      }
    } catch (const GatewayError& e) {
      item_failures[i] =
          FailureRecord{job.sample->tuple.id + "/" + job.image_label, "project", e.what()};
    }
  });

  std::vector<PointwiseProjection> out;
  out.reserve(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (slots[i].has_value()) out.push_back(std::move(*slots[i]));
    if (item_failures[i].has_value()) failures.push_back(std::move(*item_failures[i]));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.tuple_id, a.image_label) < std::tie(b.tuple_id, b.image_label);
  });
  return out;
}

std::vector<SftRecord> make_sft_records(const std::vector<RationalizedSample>& retained,
                                        const std::vector<PointwiseProjection>& projections,
                                        const PromptTemplates& templates) {
  std::vector<SftRecord> records;
  records.reserve(retained.size() + projections.size());
  for (const auto& s : retained) {
    PromptRequest req;
    req.kind = s.tuple.kind;
    req.instruction = s.tuple.instruction;
    SftRecord rec;
    rec.kind = "pairwise";
    rec.prompt = templates.build_foresight_prompt(req);
    rec.target = emit_pairwise(s.rationale);
    rec.tuple_id = s.tuple.id;
    records.push_back(std::move(rec));
  }
  for (const auto& p : projections) {
    const RationalizedSample* sample = nullptr;
    for (const auto& s : retained)
      if (s.tuple.id == p.tuple_id) {
        sample = &s;
        break;
      }
    if (sample == nullptr)
      throw std::invalid_argument("projection references unknown tuple: " + p.tuple_id);
    PromptRequest req;
    req.kind = sample->tuple.kind;
    req.instruction = sample->tuple.instruction;
    req.image_label = p.image_label;
    SftRecord rec;
    rec.kind = "pointwise";
    rec.prompt = templates.build_pointwise_student_prompt(req);
    rec.target = emit_pointwise(p.assessment);
    rec.tuple_id = p.tuple_id;
    rec.image_label = p.image_label;
    records.push_back(std::move(rec));
  }
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.tuple_id, a.image_label) < std::tie(b.tuple_id, b.image_label);
  });
  return records;
}

void emit_sft(const std::vector<RationalizedSample>& retained,
              const std::vector<PointwiseProjection>& projections,
              const PromptTemplates& templates, const std::string& pairwise_path,
              const std::string& pointwise_path) {
  const std::vector<SftRecord> records = make_sft_records(retained, projections, templates);
  std::vector<std::string> pairwise_lines, pointwise_lines;
  for (const auto& r : records) {
    (r.kind == "pairwise" ? pairwise_lines : pointwise_lines).push_back(sft_record_to_json(r));
  }
  write_lines_atomic(pairwise_path, pairwise_lines);
  write_lines_atomic(pointwise_path, pointwise_lines);
}

std::string sample_to_json(const RationalizedSample& s) {
  json j = {
      {"tuple", tuple_to_json(s.tuple)},
      {"label", std::string(winner_name(s.label.y))},
      {"consistency", std::string(consistency_name(s.consistency))},
      {"detail", s.detail},
  };
  if (s.consistency != ConsistencyState::Malformed) {
    j["rationale"] = emit_pairwise(s.rationale);
    j["scores"] = scores_pairwise(s.rationale);
  }
  return j.dump();
}

RationalizedSample sample_from_json(const std::string& line) {
  const json j = json::parse(line);
  RationalizedSample s;
  s.tuple = tuple_from_json(j.at("tuple"));
  s.label = PreferenceLabel::from_winner(winner_from(j.at("label").get<std::string>()));
  const std::string state = j.at("consistency").get<std::string>();
  if (state == "unset") s.consistency = ConsistencyState::Unset;
  else if (state == "passed") s.consistency = ConsistencyState::Passed;
  else if (state == "failed") s.consistency = ConsistencyState::Failed;
  else if (state == "malformed") s.consistency = ConsistencyState::Malformed;
  else throw std::invalid_argument("unknown consistency state: " + state);
  s.detail = j.value("detail", "");
  if (j.contains("rationale")) s.rationale = parse_pairwise(j["rationale"].get<std::string>());
  return s;
}

std::string projection_to_json(const PointwiseProjection& p) {
  return json{
      {"id", p.tuple_id},
      {"image_label", p.image_label},
      {"assessment", emit_pointwise(p.assessment)},
      {"scores", scores_pointwise(p.assessment)},
  }.dump();
}

PointwiseProjection projection_from_json(const std::string& line) {
  const json j = json::parse(line);
  PointwiseProjection p;
  p.tuple_id = j.at("id").get<std::string>();
  p.image_label = j.at("image_label").get<std::string>();
  p.assessment = parse_pointwise(j.at("assessment").get<std::string>());
  return p;
}

std::string sft_record_to_json(const SftRecord& r) {
  json meta = {{"id", r.tuple_id}};
  if (!r.image_label.empty()) meta["image_label"] = r.image_label;
  return json{
      {"kind", r.kind},
      {"prompt", r.prompt},
      {"target", r.target},
      {"meta", meta},
  }.dump();
}

}  // namespace parrot
