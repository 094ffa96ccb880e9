#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "parrot/mock_server.hpp"
#include "parrot/pipeline.hpp"
#include "test_support.hpp"

using namespace parrot;

namespace {

ComparisonTuple make_comparison_tuple(const std::string& id, const std::string& tag) {
  ComparisonTuple t;
  t.id = id;
  t.kind = TaskKind::ImageEditing;
  t.instruction = "Edit request " + tag + " for tuple " + id;
  t.source = ImageRef::from_string("data:image/png;base64,Uw==");
  t.image_a = ImageRef::from_string("data:image/png;base64,QQ==");
  t.image_b = ImageRef::from_string("data:image/png;base64,Qg==");
  return t;
}

std::vector<LabeledPair> make_pairs(int n, int pass_count) {
  std::vector<LabeledPair> pairs;
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "pair-%03d", i);
    const std::string tag = i < pass_count ? "GOODCASE" : "BADCASE";
    pairs.push_back({make_comparison_tuple(id, tag), PreferenceLabel::from_winner(Winner::A)});
  }
  return pairs;
}

std::string fixture_rationale_text() {
  Rng rng(1);
  PairwiseRationale r = parrot::testing::random_pairwise(rng);
  for (auto& j : r.judgements) {
    if (j.score_a.is_na()) continue;
    j.score_a = Score::of(3.5);
    j.score_b = Score::of(2.5);
    j.winner = Winner::A;
  }
  return emit_pairwise(r);
}

std::string fixture_pointwise_text() {
  Rng rng(2);
  PointwiseAssessment a = parrot::testing::random_pointwise(rng, false);
  a.per_aspect[3].score = Score::not_applicable();
  return emit_pointwise(a);
}

EndpointConfig endpoint_for(const MockServer& server) {
  EndpointConfig cfg;
  cfg.base_url = server.base_url();
  cfg.timeout_s = 10.0;
  cfg.max_retries = 1;
  cfg.backoff_base_s = 0.01;
  cfg.max_inflight = 8;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(static_cast<bool>(in), "cannot open " << path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("jsonl pair loading enforces tuple invariants") {
  const std::string good =
      R"({"id":"p1","kind":"editing","instruction":"add a hat","source":"data:image/png;base64,Uw==","image_a":"a.png","image_b":"b.png","label":"A"})";
  const auto pairs = parse_pairs_jsonl(good + "\n");
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].tuple.id == "p1");
  CHECK(pairs[0].label.y == Winner::A);

  CHECK_THROWS(parse_pairs_jsonl(
      R"({"id":"p2","kind":"editing","instruction":"x","image_a":"a.png","image_b":"b.png","label":"A"})"));
  CHECK_THROWS(parse_pairs_jsonl(
      R"({"id":"p3","kind":"t2i","instruction":"x","image_a":"a.png","image_b":"a.png","label":"B"})"));
  CHECK_THROWS(parse_pairs_jsonl(
      R"({"id":"p4","kind":"t2i","instruction":"x","image_a":"a.png","image_b":"b.png","label":"Tie"})"));
  CHECK(parse_pairs_jsonl("").empty());
}

TEST_CASE("phase1 parses well-formed replies and keeps malformed ones marked") {
  MockScript script;
  script.rules.push_back({"tuple pair-00", fixture_rationale_text(), 0, 500, 0.0, -1});
  MockServer server(std::move(script));
  const GatewayClient teacher(endpoint_for(server));
  const PromptTemplates templates = PromptTemplates::builtin();
  std::vector<FailureRecord> failures;

  const auto samples = phase1_generate(make_pairs(10, 10), teacher, templates, failures);
  CHECK(samples.size() == 10);
  CHECK(failures.empty());
  for (const auto& s : samples) CHECK(s.consistency == ConsistencyState::Unset);

  // Sorted by tuple id.
  for (std::size_t i = 1; i < samples.size(); ++i)
    CHECK(samples[i - 1].tuple.id < samples[i].tuple.id);
}

TEST_CASE("phase1 marks garbage replies malformed without dropping them") {
  MockScript script;
  script.rules.push_back({"GOODCASE", fixture_rationale_text(), 0, 500, 0.0, -1});
  script.rules.push_back({"BADCASE", "no structure here at all", 0, 500, 0.0, -1});
  MockServer server(std::move(script));
  const GatewayClient teacher(endpoint_for(server));
  std::vector<FailureRecord> failures;

  const auto samples =
      phase1_generate(make_pairs(10, 7), teacher, PromptTemplates::builtin(), failures);
  CHECK(samples.size() == 10);
  int malformed = 0;
  for (const auto& s : samples)
    if (s.consistency == ConsistencyState::Malformed) ++malformed;
  CHECK(malformed == 3);
  CHECK(failures.empty());
}

TEST_CASE("phase1 records gateway failures per item and keeps going") {
  MockScript script;
  script.rules.push_back({"tuple pair-000", "", 10, 500, 0.0, -1});  // always 500
  script.rules.push_back({"tuple pair-", fixture_rationale_text(), 0, 500, 0.0, -1});
  MockServer server(std::move(script));
  const GatewayClient teacher(endpoint_for(server));
  std::vector<FailureRecord> failures;

  const auto samples =
      phase1_generate(make_pairs(5, 5), teacher, PromptTemplates::builtin(), failures);
  CHECK(samples.size() == 4);
  REQUIRE(failures.size() == 1);
  CHECK(failures[0].id == "pair-000");
  CHECK(failures[0].phase == "phase1");
}

TEST_CASE("phase1 on an empty batch") {
  MockScript script;
  MockServer server(std::move(script));
  const GatewayClient teacher(endpoint_for(server));
  std::vector<FailureRecord> failures;
  CHECK(phase1_generate({}, teacher, PromptTemplates::builtin(), failures).empty());
}

TEST_CASE("phase2 retention and conservation") {
  // Phase 1 against an always-well-formed teacher.
  MockScript gen_script;
  gen_script.rules.push_back({"tuple pair-", fixture_rationale_text(), 0, 500, 0.0, -1});
  MockServer gen_server(std::move(gen_script));
  const GatewayClient gen_teacher(endpoint_for(gen_server));
  const PromptTemplates templates = PromptTemplates::builtin();
  std::vector<FailureRecord> failures;
  auto samples = phase1_generate(make_pairs(100, 72), gen_teacher, templates, failures);
  REQUIRE(samples.size() == 100);

  // Consistency judge agrees on the 72 GOODCASE tuples, answers Tie otherwise.
  MockScript judge_script;
  judge_script.rules.push_back({"GOODCASE", "A is preferred", 0, 500, 0.0, -1});
  judge_script.rules.push_back({"BADCASE", "Tie", 0, 500, 0.0, -1});
  MockServer judge_server(std::move(judge_script));
  const GatewayClient judge(endpoint_for(judge_server));

  auto [retained, stats] = phase2_filter(std::move(samples), judge, templates, failures);
  CHECK(retained.size() == 72);
  CHECK(stats.generated == 100);
  CHECK(stats.passed == 72);
  CHECK(stats.failed == 28);
  CHECK(stats.malformed == 0);
  CHECK(stats.retention() == doctest::Approx(0.72).epsilon(1e-12));
  CHECK(stats.generated == stats.passed + stats.failed + stats.malformed);
  for (const auto& s : retained) CHECK(s.consistency == ConsistencyState::Passed);
}

TEST_CASE("phase2 tie answers always fail; agreement always passes") {
  MockScript gen_script;
  gen_script.rules.push_back({"tuple pair-", fixture_rationale_text(), 0, 500, 0.0, -1});
  MockServer gen_server(std::move(gen_script));
  const GatewayClient teacher(endpoint_for(gen_server));
  const PromptTemplates templates = PromptTemplates::builtin();
  std::vector<FailureRecord> failures;

  {
    auto samples = phase1_generate(make_pairs(10, 10), teacher, templates, failures);
    MockScript judge_script;
    judge_script.rules.push_back({"", "A is preferred", 0, 500, 0.0, -1});
    MockServer judge_server(std::move(judge_script));
    const GatewayClient judge(endpoint_for(judge_server));
    auto [retained, stats] = phase2_filter(std::move(samples), judge, templates, failures);
    CHECK(stats.retention() == doctest::Approx(1.0));
  }
  {
    auto samples = phase1_generate(make_pairs(10, 10), teacher, templates, failures);
    MockScript judge_script;
    judge_script.rules.push_back({"", "Tie", 0, 500, 0.0, -1});
    MockServer judge_server(std::move(judge_script));
    const GatewayClient judge(endpoint_for(judge_server));
    auto [retained, stats] = phase2_filter(std::move(samples), judge, templates, failures);
    CHECK(retained.empty());
    CHECK(stats.retention() == doctest::Approx(0.0));
  }
}

TEST_CASE("phase2 treats ambiguous judge output as failure with reason") {
  MockScript gen_script;
  gen_script.rules.push_back({"tuple pair-", fixture_rationale_text(), 0, 500, 0.0, -1});
  MockServer gen_server(std::move(gen_script));
  const GatewayClient teacher(endpoint_for(gen_server));
  const PromptTemplates templates = PromptTemplates::builtin();
  std::vector<FailureRecord> failures;
  auto samples = phase1_generate(make_pairs(2, 2), teacher, templates, failures);

  MockScript judge_script;
  judge_script.rules.push_back({"", "cannot tell", 0, 500, 0.0, -1});
  MockServer judge_server(std::move(judge_script));
  const GatewayClient judge(endpoint_for(judge_server));
  auto [retained, stats] = phase2_filter(std::move(samples), judge, templates, failures);
  CHECK(retained.empty());
  CHECK(stats.failed == 2);
}

TEST_CASE("pointwise projection doubles the retained set") {
  MockScript gen_script;
  gen_script.rules.push_back({"tuple pair-", fixture_rationale_text(), 0, 500, 0.0, -1});
  MockServer gen_server(std::move(gen_script));
  const GatewayClient teacher(endpoint_for(gen_server));
  const PromptTemplates templates = PromptTemplates::builtin();
  std::vector<FailureRecord> failures;
  auto samples = phase1_generate(make_pairs(6, 6), teacher, templates, failures);
  for (auto& s : samples) s.consistency = ConsistencyState::Passed;

  MockScript point_script;
  point_script.rules.push_back({"", fixture_pointwise_text(), 0, 500, 0.0, -1});
  MockServer point_server(std::move(point_script));
  const GatewayClient point_teacher(endpoint_for(point_server));
  const auto projections = project_pointwise(samples, point_teacher, templates, failures);
  CHECK(projections.size() == 12);
  for (const auto& p : projections) {
    CHECK((p.image_label == "Edited Image A" || p.image_label == "Edited Image B"));
    CHECK(p.assessment.per_aspect[3].score.is_na());
  }
  CHECK(project_pointwise({}, point_teacher, templates, failures).empty());
}

TEST_CASE("sft emission is label-free, counted, and bytewise stable") {
  MockScript gen_script;
  gen_script.rules.push_back({"tuple pair-", fixture_rationale_text(), 0, 500, 0.0, -1});
  MockServer gen_server(std::move(gen_script));
  const GatewayClient teacher(endpoint_for(gen_server));
  const PromptTemplates templates = PromptTemplates::builtin();
  std::vector<FailureRecord> failures;
  auto samples = phase1_generate(make_pairs(5, 5), teacher, templates, failures);
  for (auto& s : samples) s.consistency = ConsistencyState::Passed;

  MockScript point_script;
  point_script.rules.push_back({"", fixture_pointwise_text(), 0, 500, 0.0, -1});
  MockServer point_server(std::move(point_script));
  const GatewayClient point_teacher(endpoint_for(point_server));
  const auto projections = project_pointwise(samples, point_teacher, templates, failures);
  REQUIRE(projections.size() == 10);

  const std::string dir = std::filesystem::temp_directory_path().string();
  const std::string pair_path = dir + "/parrot_test_pairwise.jsonl";
  const std::string point_path = dir + "/parrot_test_pointwise.jsonl";
  emit_sft(samples, projections, templates, pair_path, point_path);
  const std::string pair_bytes = slurp(pair_path);
  const std::string point_bytes = slurp(point_path);

  CHECK(pair_bytes.find("human preference is") == std::string::npos);
  CHECK(point_bytes.find("human preference is") == std::string::npos);
  CHECK(count_occurrences(pair_bytes, "\"kind\":\"pairwise\"") == 5);
  CHECK(count_occurrences(point_bytes, "\"kind\":\"pointwise\"") == 10);

  emit_sft(samples, projections, templates, pair_path, point_path);
  CHECK(slurp(pair_path) == pair_bytes);
  CHECK(slurp(point_path) == point_bytes);

  std::remove(pair_path.c_str());
  std::remove(point_path.c_str());
}

TEST_CASE("sample serialization round-trips") {
  MockScript gen_script;
  gen_script.rules.push_back({"tuple pair-", fixture_rationale_text(), 0, 500, 0.0, -1});
  MockServer gen_server(std::move(gen_script));
  const GatewayClient teacher(endpoint_for(gen_server));
  std::vector<FailureRecord> failures;
  const auto samples =
      phase1_generate(make_pairs(3, 3), teacher, PromptTemplates::builtin(), failures);
  for (const auto& s : samples) {
    const RationalizedSample back = sample_from_json(sample_to_json(s));
    CHECK(back.tuple.id == s.tuple.id);
    CHECK(back.label.y == s.label.y);
    CHECK(back.rationale == s.rationale);
    CHECK(sample_to_json(back) == sample_to_json(s));
  }
}
