#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace parrot {

// One scripted behavior: requests whose prompt text contains
// `match_substring` get `response_text`, optionally after `fail_times`
// scripted failures and/or an injected delay.
struct ScriptRule {
  std::string match_substring;
  std::string response_text;
  int fail_times = 0;
  int fail_status = 500;
  double latency_s = 0.0;
  int remaining_uses = -1;  // -1 = unlimited
};

struct MockScript {
  std::vector<ScriptRule> rules;
  // Fallback handler consulted when no rule matches (prompt text in, reply
  // text out). Empty means no fallback.
  std::function<std::string(const std::string&)> handler;
  // Strict mode rejects unmatched requests with an error status instead of
  // echoing.
  bool strict = true;
};

struct RecordedRequest {
  std::string path;
  std::string prompt_text;  // concatenated text parts of the last user message
  std::string body;
};

// In-process chat-completions + image-generation server for offline tests.
// Serves on 127.0.0.1 at an ephemeral port.
class MockServer {
 public:
  explicit MockServer(MockScript script);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  int port() const;
  std::string base_url() const;

  std::vector<RecordedRequest> requests() const;
  std::size_t request_count() const;
  int peak_inflight() const;
  std::size_t unmatched_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Deterministic pseudo-image payload for (prompt, seed); the mock generator
// and its tests share this.
std::string mock_image_payload(const std::string& prompt, std::uint64_t seed);

}  // namespace parrot
