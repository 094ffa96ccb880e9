#include <benchmark/benchmark.h>

#include "parrot/elbo.hpp"
#include "parrot/rationale.hpp"
#include "parrot/reward.hpp"
#include "parrot/util.hpp"

namespace {

using namespace parrot;

PairwiseRationale sample_rationale() {
  PairwiseRationale r;
  r.understanding = "The user wants the sky recolored while keeping the skyline intact.";
  for (std::size_t i = 0; i < kAllAspects.size(); ++i) {
    AspectJudgement& j = r.judgements[i];
    j.aspect = kAllAspects[i];
    j.justification = "Image A follows the requested change more closely than Image B.";
    j.score_a = Score::of(3.5);
    j.score_b = Score::of(2.75);
    j.winner = Winner::A;
  }
  r.judgements[3].score_a = Score::not_applicable();
  r.judgements[3].score_b = Score::not_applicable();
  r.judgements[3].winner = Winner::Tie;
  r.summary = "Image A is preferred on faithfulness and quality.";
  return r;
}

void BM_EmitPairwise(benchmark::State& state) {
  const PairwiseRationale r = sample_rationale();
  for (auto _ : state) benchmark::DoNotOptimize(emit_pairwise(r));
}
BENCHMARK(BM_EmitPairwise);

void BM_ParsePairwise(benchmark::State& state) {
  const std::string text = emit_pairwise(sample_rationale());
  for (auto _ : state) benchmark::DoNotOptimize(parse_pairwise(text));
}
BENCHMARK(BM_ParsePairwise);

void BM_NormalizeGroup(benchmark::State& state) {
  Rng rng(7);
  std::vector<double> raws(static_cast<std::size_t>(state.range(0)));
  for (auto& r : raws) r = rng.uniform(1.0, 4.0);
  for (auto _ : state) benchmark::DoNotOptimize(normalize_group(raws));
}
BENCHMARK(BM_NormalizeGroup)->Arg(16)->Arg(256);

void BM_ElboCheck(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(run_elbo_check(static_cast<std::size_t>(state.range(0)), 11));
}
BENCHMARK(BM_ElboCheck)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
