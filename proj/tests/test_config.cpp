#include <doctest.h>

#include "parrot/config.hpp"

using namespace parrot;

namespace {

const char* kFullConfig = R"(
# annotated example
[endpoint.teacher]
base_url = http://127.0.0.1:8080
model = teacher-vlm
timeout_s = 30
max_retries = 3
max_inflight = 4
temperature = 0.7

[endpoint.judge]
base_url = http://127.0.0.1:8081

[endpoint.generator]
base_url = http://127.0.0.1:8082

[reward]
epsilon = 1e-6
mean_threshold = 0.9
std_threshold = 0.05

[nft]
group_size = 16
beta = 0.0001
learning_rate = 0.0002
iterations = 500
noise_level = 0.7
sample_steps = 15

[gcr]
threshold = 3.0
max_iterations = 1

[paths]
out_dir = out
)";

}  // namespace

TEST_CASE("full config parses with defaults applied") {
  const AppConfig cfg = AppConfig::parse(kFullConfig);
  CHECK(cfg.require_endpoint("teacher").model == "teacher-vlm");
  CHECK(cfg.require_endpoint("teacher").temperature == doctest::Approx(0.7));
  CHECK(cfg.require_endpoint("judge").base_url == "http://127.0.0.1:8081");
  CHECK(cfg.nft.group_size == 16);
  CHECK(cfg.nft.beta == doctest::Approx(1e-4));
  CHECK(cfg.nft.noise_level == doctest::Approx(0.7));
  CHECK(cfg.nft.sample_steps == 15);
  CHECK(cfg.reward.mean_threshold == doctest::Approx(0.9));
  CHECK(cfg.gcr.threshold == doctest::Approx(3.0));
  CHECK(cfg.gcr.max_iterations == 1);
  CHECK(cfg.out_dir == "out");
}

TEST_CASE("missing endpoint section names the field path") {
  const AppConfig cfg = AppConfig::parse("[reward]\nepsilon = 1e-6\n");
  try {
    cfg.require_endpoint("teacher");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field == "endpoint.teacher");
    CHECK(std::string(e.what()).find("endpoint.teacher") != std::string::npos);
  }
}

TEST_CASE("invalid values are rejected with field paths") {
  CHECK_THROWS_AS(AppConfig::parse("[reward]\nepsilon = zero\n"), ConfigError);
  CHECK_THROWS_AS(AppConfig::parse("[reward]\nunknown_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(AppConfig::parse("[bogus]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(AppConfig::parse("[nft]\ngroup_size = 1\n"), ConfigError);
  CHECK_THROWS_AS(AppConfig::parse("[gcr]\nthreshold = 5\n"), ConfigError);
  CHECK_THROWS_AS(AppConfig::parse("[endpoint.teacher]\nmodel = m\n"), ConfigError);
  CHECK_THROWS_AS(AppConfig::parse("key_outside_section = 1\n"), ConfigError);
}

TEST_CASE("comments and blank lines are ignored") {
  const AppConfig cfg = AppConfig::parse(
      "# comment\n\n; another comment\n[gcr]\n# inline section comment\nthreshold = 2.5\n");
  CHECK(cfg.gcr.threshold == doctest::Approx(2.5));
}

TEST_CASE("inline comments after whitespace are stripped, glued markers are kept") {
  const AppConfig cfg = AppConfig::parse(
      "[gcr]\nthreshold = 2.5  # refine below this\n"
      "[endpoint.judge]\nbase_url = http://host/a#frag\n");
  CHECK(cfg.gcr.threshold == doctest::Approx(2.5));
  CHECK(cfg.require_endpoint("judge").base_url == "http://host/a#frag");
}
