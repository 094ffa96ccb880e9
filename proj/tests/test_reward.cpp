#include <doctest.h>

#include <cmath>

#include "parrot/reward.hpp"
#include "test_support.hpp"

using namespace parrot;

namespace {

DimensionScores make_scores(Score tf, Score imf, Score pq, Score tr) {
  DimensionScores s;
  s.scores = {{Aspect::TextFaithfulness, tf},
              {Aspect::ImageFaithfulness, imf},
              {Aspect::PhysicalVisualQuality, pq},
              {Aspect::TextRendering, tr}};
  return s;
}

// Independent oracle: plain mean over numeric entries.
double brute_force_mean(const DimensionScores& s) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [aspect, score] : s.scores) {
    if (score.is_na()) continue;
    sum += score.value();
    ++n;
  }
  return sum / n;
}

}  // namespace

TEST_CASE("aggregate excludes N/A dimensions") {
  CHECK(aggregate(make_scores(Score::of(4), Score::of(3), Score::of(2),
                              Score::not_applicable())) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(aggregate(make_scores(Score::of(4), Score::of(4), Score::of(4), Score::of(4))) ==
        doctest::Approx(4.0));
  CHECK(aggregate(make_scores(Score::of(3.5), Score::not_applicable(), Score::of(2.5),
                              Score::not_applicable())) == doctest::Approx(3.0));
  CHECK_THROWS_AS(aggregate(make_scores(Score::not_applicable(), Score::not_applicable(),
                                        Score::not_applicable(), Score::not_applicable())),
                  NoActiveDimensions);
}

TEST_CASE("aggregate equals the brute-force mean on random maps") {
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    DimensionScores s;
    int active = 0;
    for (Aspect a : kAllAspects) {
      if (rng.uniform() < 0.25) {
        s.scores[a] = Score::not_applicable();
      } else {
        s.scores[a] = parrot::testing::random_score(rng);
        ++active;
      }
    }
    if (active == 0) {
      CHECK_THROWS_AS(aggregate(s), NoActiveDimensions);
      continue;
    }
    const double r = aggregate(s);
    CHECK(r == doctest::Approx(brute_force_mean(s)).epsilon(1e-12));
    CHECK(r >= 1.0);
    CHECK(r <= 4.0);
    // Adding an N/A dimension never changes the result.
    DimensionScores padded = s;
    padded.scores[Aspect::TextRendering] = Score::not_applicable();
    if (padded.active().empty()) continue;
    CHECK(aggregate(padded) == doctest::Approx(brute_force_mean(padded)).epsilon(1e-12));
  }
}

TEST_CASE("normalize_group matches hand-computed vectors") {
  // raws [1..5]: mean 3, population std sqrt(2).
  const auto out = normalize_group({1, 2, 3, 4, 5});
  const double s = std::sqrt(2.0);
  const std::vector<double> expected = {
      0.0, 0.5 - 0.5 / s, 0.5, 0.5 + 0.5 / s, 1.0,
  };
  REQUIRE(out.size() == expected.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out[i] == doctest::Approx(expected[i]).epsilon(1e-9));
  CHECK(out[1] == doctest::Approx(0.14644660940672627).epsilon(1e-9));
  CHECK(out[3] == doctest::Approx(0.85355339059327373).epsilon(1e-9));

  const auto equal = normalize_group({3, 3, 3});
  for (double v : equal) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

  const auto clipped = normalize_group({0, 10});
  CHECK(clipped[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(clipped[1] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(normalize_group({1.0}), GroupTooSmall);
  CHECK_THROWS_AS(normalize_group({}), GroupTooSmall);
}

TEST_CASE("normalize_group properties: bounds, shift and scale invariance, order") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = static_cast<std::size_t>(rng.uniform_int(2, 32));
    std::vector<double> raws(k);
    for (auto& r : raws) r = rng.uniform(1.0, 4.0);
    const auto base = normalize_group(raws);
    for (double v : base) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    // Monotone: order preserved (allowing clipped plateaus).
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        if (raws[i] < raws[j]) CHECK(base[i] <= base[j] + 1e-12);

    // Shift and positive scale leave the normalized values unchanged while
    // the epsilon floor stays inactive.
    const double shift = rng.uniform(-5.0, 5.0);
    const double scale = rng.uniform(0.5, 3.0);
    std::vector<double> transformed(k);
    for (std::size_t i = 0; i < k; ++i) transformed[i] = raws[i] * scale + shift;
    const auto moved = normalize_group(transformed);
    bool degenerate = true;
    for (double r : raws)
      if (std::abs(r - raws[0]) > 1e-9) degenerate = false;
    if (!degenerate) {
      for (std::size_t i = 0; i < k; ++i)
        CHECK(moved[i] == doctest::Approx(base[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("quality filter thresholds") {
  const auto skip_mean = quality_filter({0.95, 0.95, 0.92});
  CHECK_FALSE(skip_mean.keep);
  CHECK(skip_mean.reason == "mean");

  const auto skip_std = quality_filter({0.5, 0.52, 0.49});
  CHECK_FALSE(skip_std.keep);
  CHECK(skip_std.reason == "std");

  const auto keep = quality_filter({0.1, 0.5, 0.9});
  CHECK(keep.keep);
}

TEST_CASE("training prompt selection uses strict inequality at 3.0") {
  const auto selected = select_training_prompts({{"p1", 2.9}, {"p2", 3.0}, {"p3", 3.5}});
  REQUIRE(selected.size() == 1);
  CHECK(selected[0] == "p1");
  CHECK(select_training_prompts({}).empty());
  CHECK(select_training_prompts({{"a", 1.0}, {"b", 2.0}}).size() == 2);
}

TEST_CASE("pairwise accuracy with tie rule") {
  std::vector<BenchmarkItem> items = {
      {"1", Winner::A, Winner::A},
      {"2", Winner::B, Winner::B},
      {"3", Winner::A, Winner::B},
      {"4", Winner::B, Winner::B},
  };
  CHECK(pairwise_accuracy(items) == doctest::Approx(0.75));

  for (auto& item : items) item.verdict = Winner::Tie;
  CHECK(pairwise_accuracy(items) == doctest::Approx(0.0));

  for (auto& item : items) item.verdict = item.gold;
  CHECK(pairwise_accuracy(items) == doctest::Approx(1.0));

  CHECK_THROWS_AS(pairwise_accuracy({}), EmptyBenchmark);
}
