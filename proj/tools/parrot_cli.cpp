// parrot: command-line front end wiring the pipeline, reward, NFT, ELBO,
// GCR, and mock-server pieces together behind one config file.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "parrot/config.hpp"
#include "parrot/elbo.hpp"
#include "parrot/gcr.hpp"
#include "parrot/mock_server.hpp"
#include "parrot/nft.hpp"
#include "parrot/pipeline.hpp"
#include "parrot/reward.hpp"

namespace {

using nlohmann::json;
using namespace parrot;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!trim(line).empty()) lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    for (const auto& line : lines) out << line << '\n';
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed: " + path);
}

PromptTemplates templates_for(const AppConfig& cfg) {
  if (!cfg.template_dir.empty()) return PromptTemplates::from_dir(cfg.template_dir);
  return PromptTemplates::builtin();
}

void log_stats(const PipelineStats& stats) {
  std::fprintf(stderr,
               "generated=%zu passed=%zu failed=%zu malformed=%zu retention=%.4f\n",
               stats.generated, stats.passed, stats.failed, stats.malformed, stats.retention());
}

std::vector<RationalizedSample> read_samples(const std::string& path) {
  std::vector<RationalizedSample> samples;
  for (const auto& line : read_lines(path)) samples.push_back(sample_from_json(line));
  return samples;
}

Winner winner_from_text(const std::string& s) {
  const std::string w = to_lower(trim(s));
  if (w == "a") return Winner::A;
  if (w == "b") return Winner::B;
  if (w == "tie") return Winner::Tie;
  throw std::invalid_argument("unknown winner: " + s);
}

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

int cmd_rationalize(const std::string& config_path, const std::string& pairs_path,
                    const std::string& out_path, const std::string& failures_path,
                    bool dry_run) {
  const AppConfig cfg = AppConfig::load(config_path);
  const auto pairs = load_pairs(pairs_path);
  if (dry_run) {
    std::fprintf(stderr, "dry-run: %zu pairs, %zu teacher calls planned\n", pairs.size(),
                 pairs.size());
    return kExitOk;
  }
  const GatewayClient teacher(cfg.require_endpoint("teacher"));
  const PromptTemplates templates = templates_for(cfg);
  std::vector<FailureRecord> failures;
  const auto samples = phase1_generate(pairs, teacher, templates, failures);
  std::vector<std::string> lines;
  for (const auto& s : samples) lines.push_back(sample_to_json(s));
  write_lines(out_path, lines);
  if (!failures_path.empty()) write_failures(failures_path, failures);
  std::fprintf(stderr, "rationalized %zu of %zu pairs (%zu failures)\n", samples.size(),
               pairs.size(), failures.size());
  return kExitOk;
}

int cmd_filter(const std::string& config_path, const std::string& in_path,
               const std::string& out_path, const std::string& failures_path,
               const std::string& stats_path, bool dry_run) {
  const AppConfig cfg = AppConfig::load(config_path);
  auto samples = read_samples(in_path);
  if (dry_run) {
    std::size_t calls = 0;
    for (const auto& s : samples)
      if (s.consistency != ConsistencyState::Malformed) ++calls;
    std::fprintf(stderr, "dry-run: %zu samples, %zu consistency calls planned\n", samples.size(),
                 calls);
    return kExitOk;
  }
  const GatewayClient teacher(cfg.require_endpoint("teacher"));
  const PromptTemplates templates = templates_for(cfg);
  std::vector<FailureRecord> failures;
  auto [retained, stats] = phase2_filter(std::move(samples), teacher, templates, failures);
  std::vector<std::string> lines;
  for (const auto& s : retained) lines.push_back(sample_to_json(s));
  write_lines(out_path, lines);
  if (!failures_path.empty()) write_failures(failures_path, failures);
  if (!stats_path.empty()) {
    write_lines(stats_path, {json{{"generated", stats.generated},
                                  {"passed", stats.passed},
                                  {"failed", stats.failed},
                                  {"malformed", stats.malformed},
                                  {"retention", stats.retention()}}
                                 .dump()});
  }
  log_stats(stats);
  return kExitOk;
}

int cmd_project(const std::string& config_path, const std::string& in_path,
                const std::string& out_path, const std::string& failures_path, bool dry_run) {
  const AppConfig cfg = AppConfig::load(config_path);
  const auto retained = read_samples(in_path);
  if (dry_run) {
    std::fprintf(stderr, "dry-run: %zu retained samples, %zu pointwise calls planned\n",
                 retained.size(), retained.size() * 2);
    return kExitOk;
  }
  const GatewayClient teacher(cfg.require_endpoint("teacher"));
  const PromptTemplates templates = templates_for(cfg);
  std::vector<FailureRecord> failures;
  const auto projections = project_pointwise(retained, teacher, templates, failures);
  std::vector<std::string> lines;
  for (const auto& p : projections) lines.push_back(projection_to_json(p));
  write_lines(out_path, lines);
  if (!failures_path.empty()) write_failures(failures_path, failures);
  std::fprintf(stderr, "projected %zu assessments from %zu samples (%zu failures)\n",
               projections.size(), retained.size(), failures.size());
  return kExitOk;
}

int cmd_emit_sft(const std::string& config_path, const std::string& retained_path,
                 const std::string& projections_path, const std::string& pairwise_out,
                 const std::string& pointwise_out) {
  const AppConfig cfg = config_path.empty() ? AppConfig{} : AppConfig::load(config_path);
  const PromptTemplates templates = templates_for(cfg);
  const auto retained = read_samples(retained_path);
  std::vector<PointwiseProjection> projections;
  for (const auto& line : read_lines(projections_path))
    projections.push_back(projection_from_json(line));
  emit_sft(retained, projections, templates, pairwise_out, pointwise_out);
  std::fprintf(stderr, "emitted %zu pairwise and %zu pointwise records\n", retained.size(),
               projections.size());
  return kExitOk;
}

int cmd_score(const std::string& config_path, const std::string& in_path,
              const std::string& out_path) {
  const AppConfig cfg = config_path.empty() ? AppConfig{} : AppConfig::load(config_path);
  std::vector<PointwiseProjection> projections;
  for (const auto& line : read_lines(in_path)) projections.push_back(projection_from_json(line));

  // Group by tuple id; order within a group follows the input order.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < projections.size(); ++i)
    groups[projections[i].tuple_id].push_back(i);

  std::vector<std::string> lines;
  std::map<std::string, double> mean_raw_by_prompt;
  for (const auto& [id, indices] : groups) {
    std::vector<double> raws;
    raws.reserve(indices.size());
    for (std::size_t i : indices)
      raws.push_back(aggregate(DimensionScores::from_assessment(projections[i].assessment),
                               cfg.reward));
    std::vector<double> normalized;
    FilterDecision decision{true, ""};
    if (raws.size() >= 2) {
      normalized = normalize_group(raws, cfg.reward);
      decision = quality_filter(normalized, cfg.reward);
    }
    double mean_raw = 0.0;
    for (double r : raws) mean_raw += r;
    mean_raw /= static_cast<double>(raws.size());
    mean_raw_by_prompt[id] = mean_raw;
    for (std::size_t k = 0; k < indices.size(); ++k) {
      json j = {
          {"id", id},
          {"image_label", projections[indices[k]].image_label},
          {"raw", raws[k]},
          {"group_keep", decision.keep},
      };
      if (!normalized.empty()) j["normalized"] = normalized[k];
      if (!decision.keep) j["skip_reason"] = decision.reason;
      lines.push_back(j.dump());
    }
  }
  write_lines(out_path, lines);
  const auto selected = select_training_prompts(mean_raw_by_prompt);
  std::fprintf(stderr, "scored %zu assessments in %zu groups; %zu prompts below average\n",
               projections.size(), groups.size(), selected.size());
  return kExitOk;
}

int cmd_bench_pairwise(const std::string& in_path) {
  std::vector<BenchmarkItem> items;
  for (const auto& line : read_lines(in_path)) {
    const json j = json::parse(line);
    BenchmarkItem item;
    item.id = j.at("id").get<std::string>();
    item.gold = winner_from_text(j.at("gold").get<std::string>());
    item.verdict = winner_from_text(j.at("verdict").get<std::string>());
    items.push_back(std::move(item));
  }
  const double accuracy = pairwise_accuracy(items);
  std::printf("accuracy=%.6f n=%zu\n", accuracy, items.size());
  return kExitOk;
}

int cmd_nft_train(const std::string& config_path, std::uint64_t seed, int iterations,
                  const std::string& metrics_out, const std::string& checkpoint_out) {
  AppConfig cfg = config_path.empty() ? AppConfig{} : AppConfig::load(config_path);
  NftConfig nft = cfg.nft;
  nft.seed = seed;
  if (iterations > 0) nft.iterations = iterations;

  Rng rng(seed);
  Rng init_rng = rng.fork(1);
  VelocityNet net(nft.n_cond, nft.hidden, init_rng);
  const BaseSampler base = two_gaussian_sampler();
  Rng pretrain_rng = rng.fork(2);
  pretrain_flow_matching(net, base, 2000, 64, 1e-3, pretrain_rng, NoiseSchedule::rectified_flow());

  const RewardFn reward = distance_reward(Eigen::Vector2d(2.0, 0.0));
  const TrainResult result = train_nft(nft, reward, net);

  std::vector<std::string> lines;
  for (const auto& m : result.metrics) {
    lines.push_back(json{{"iter", m.iter},
                         {"mean_reward", m.mean_reward},
                         {"reward_std", m.reward_std},
                         {"loss", m.loss},
                         {"group_skipped", m.group_skipped}}
                        .dump());
  }
  write_lines(metrics_out, lines);
  if (!checkpoint_out.empty()) save_checkpoint(checkpoint_out, net);
  if (!result.metrics.empty()) {
    std::fprintf(stderr, "nft-train: %d iterations, first mean reward %.4f, final %.4f\n",
                 nft.iterations, result.metrics.front().mean_reward,
                 result.metrics.back().mean_reward);
  }
  return kExitOk;
}

int cmd_elbo_check(std::size_t models, std::uint64_t seed) {
  const ElboCheckReport report = run_elbo_check(models, seed);
  std::printf("models=%zu max_bound_violation=%.3e max_tightness_residual=%.3e\n", report.models,
              report.max_bound_violation, report.max_tightness_residual);
  return kExitOk;
}

int cmd_gcr(const std::string& config_path, const std::string& request,
            const std::string& source_path, const std::string& kind_text,
            const std::string& trace_out, std::uint64_t seed) {
  const AppConfig cfg = AppConfig::load(config_path);
  const GatewayClient generator(cfg.require_endpoint("generator"));
  const GatewayClient judge(cfg.require_endpoint("judge"));
  const PromptTemplates templates = templates_for(cfg);
  std::optional<ImageRef> source;
  if (!source_path.empty()) source = ImageRef::from_string(source_path);
  const TaskKind kind = kind_text == "t2i" ? TaskKind::TextToImage : TaskKind::ImageEditing;
  const GcrTrace trace =
      run_gcr(request, source, kind, cfg.gcr, generator, judge, templates, seed);
  {
    std::ofstream out(trace_out, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + trace_out);
    out << trace_to_jsonl(trace);
  }
  std::fprintf(stderr, "gcr: %zu steps, %d generator calls, %.3f s\n", trace.steps.size(),
               trace.generator_calls, trace.total_latency_s);
  return kExitOk;
}

int cmd_mock_serve(const std::string& script_path) {
  MockScript script;
  if (!script_path.empty()) {
    const json j = json::parse(read_file(script_path));
    script.strict = j.value("strict", true);
    for (const auto& rj : j.value("rules", json::array())) {
      ScriptRule rule;
      rule.match_substring = rj.at("match").get<std::string>();
      rule.response_text = rj.value("response", "");
      rule.fail_times = rj.value("fail_times", 0);
      rule.fail_status = rj.value("fail_status", 500);
      rule.latency_s = rj.value("latency_s", 0.0);
      rule.remaining_uses = rj.value("uses", -1);
      script.rules.push_back(std::move(rule));
    }
  } else {
    script.strict = false;  // echo mode
  }
  MockServer server(std::move(script));
  std::printf("%s\n", server.base_url().c_str());
  std::fflush(stdout);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (g_stop == 0) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  std::fprintf(stderr, "mock-serve: handled %zu requests (%zu unmatched)\n",
               server.request_count(), server.unmatched_count());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"preference-anchored rationalization toolkit"};
  app.require_subcommand(1);

  std::string config_path, pairs_path, in_path, out_path, failures_path, stats_path;
  std::string projections_path, pairwise_out, pointwise_out;
  std::string request, source_path, kind_text = "editing", trace_out, metrics_out;
  std::string checkpoint_out, script_path;
  std::uint64_t seed = 0;
  int iterations = 0;
  std::size_t models = 200;
  bool dry_run = false;

  auto* rationalize = app.add_subcommand("rationalize", "Phase 1: anchored rationale generation");
  rationalize->add_option("--config", config_path)->required();
  rationalize->add_option("--pairs", pairs_path)->required();
  rationalize->add_option("--out", out_path)->required();
  rationalize->add_option("--failures", failures_path);
  rationalize->add_flag("--dry-run", dry_run);

  auto* filter = app.add_subcommand("filter", "Phase 2: predictive-consistency filter");
  filter->add_option("--config", config_path)->required();
  filter->add_option("--in", in_path)->required();
  filter->add_option("--out", out_path)->required();
  filter->add_option("--failures", failures_path);
  filter->add_option("--stats", stats_path);
  filter->add_flag("--dry-run", dry_run);

  auto* project = app.add_subcommand("project", "Phase 3: pointwise projection");
  project->add_option("--config", config_path)->required();
  project->add_option("--in", in_path)->required();
  project->add_option("--out", out_path)->required();
  project->add_option("--failures", failures_path);
  project->add_flag("--dry-run", dry_run);

  auto* emit = app.add_subcommand("emit-sft", "Write the SFT dataset files");
  emit->add_option("--config", config_path);
  emit->add_option("--in", in_path)->required();
  emit->add_option("--projections", projections_path)->required();
  emit->add_option("--pairwise-out", pairwise_out)->required();
  emit->add_option("--pointwise-out", pointwise_out)->required();

  auto* score = app.add_subcommand("score", "Aggregate, normalize, and filter rewards");
  score->add_option("--config", config_path);
  score->add_option("--in", in_path)->required();
  score->add_option("--out", out_path)->required();

  auto* bench = app.add_subcommand("bench-pairwise", "Pairwise accuracy over a verdict file");
  bench->add_option("--in", in_path)->required();

  auto* nft = app.add_subcommand("nft-train", "Toy contrastive flow-matching run");
  nft->add_option("--config", config_path);
  nft->add_option("--seed", seed);
  nft->add_option("--iterations", iterations);
  nft->add_option("--metrics-out", metrics_out)->required();
  nft->add_option("--checkpoint-out", checkpoint_out);

  auto* elbo_cmd = app.add_subcommand("elbo-check", "Bound and tightness identities");
  elbo_cmd->add_option("--models", models);
  elbo_cmd->add_option("--seed", seed);

  auto* gcr_cmd = app.add_subcommand("gcr", "Generate-critique-refine loop");
  gcr_cmd->add_option("--config", config_path)->required();
  gcr_cmd->add_option("--request", request)->required();
  gcr_cmd->add_option("--source", source_path);
  gcr_cmd->add_option("--kind", kind_text)->check(CLI::IsMember({"editing", "t2i"}));
  gcr_cmd->add_option("--trace-out", trace_out)->required();
  gcr_cmd->add_option("--seed", seed);

  auto* serve = app.add_subcommand("mock-serve", "Run the scripted mock endpoint");
  serve->add_option("--script", script_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (rationalize->parsed())
      return cmd_rationalize(config_path, pairs_path, out_path, failures_path, dry_run);
    if (filter->parsed())
      return cmd_filter(config_path, in_path, out_path, failures_path, stats_path, dry_run);
    if (project->parsed())
      return cmd_project(config_path, in_path, out_path, failures_path, dry_run);
    if (emit->parsed())
      return cmd_emit_sft(config_path, in_path, projections_path, pairwise_out, pointwise_out);
    if (score->parsed()) return cmd_score(config_path, in_path, out_path);
    if (bench->parsed()) return cmd_bench_pairwise(in_path);
    if (nft->parsed())
      return cmd_nft_train(config_path, seed, iterations, metrics_out, checkpoint_out);
    if (elbo_cmd->parsed()) return cmd_elbo_check(models, seed);
    if (gcr_cmd->parsed())
      return cmd_gcr(config_path, request, source_path, kind_text, trace_out, seed);
    if (serve->parsed()) return cmd_mock_serve(script_path);
    std::fprintf(stderr, "unknown command\n");
    return kExitValidation;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
