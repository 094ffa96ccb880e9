#include "parrot/mock_server.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "parrot/util.hpp"

namespace parrot {

using nlohmann::json;

std::string mock_image_payload(const std::string& prompt, std::uint64_t seed) {
  // 64 bytes of FNV-chained noise; stable across platforms.
  std::string out;
  out.reserve(64);
  std::uint64_t state = fnv1a(prompt) ^ (seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
  for (int i = 0; i < 8; ++i) {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((state >> (8 * b)) & 0xff));
  }
  return out;
}

namespace {

// Pulls the concatenated text parts of the last user message, or the image
// prompt field for generation requests.
std::string extract_prompt(const json& body) {
  if (body.contains("prompt") && body["prompt"].is_string())
    return body["prompt"].get<std::string>();
  if (!body.contains("messages") || !body["messages"].is_array()) return "";
  std::string text;
  for (auto it = body["messages"].rbegin(); it != body["messages"].rend(); ++it) {
    if (!it->is_object() || it->value("role", "") != "user") continue;
    const auto& content = (*it)["content"];
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
      for (const auto& part : content) {
        if (part.is_object() && part.value("type", "") == "text")
          text += part.value("text", "");
      }
    }
    return text;
  }
  return "";
}

json chat_reply(const std::string& text) {
  return {
      {"id", "mock-cmpl"},
      {"object", "chat.completion"},
      {"choices",
       json::array({{{"index", 0},
                     {"message", {{"role", "assistant"}, {"content", text}}},
                     {"finish_reason", "stop"}}})},
  };
}

}  // namespace

struct MockServer::Impl {
  MockScript script;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  mutable std::mutex mu;
  std::vector<RecordedRequest> log;
  std::size_t unmatched = 0;

  std::atomic<int> inflight{0};
  std::atomic<int> peak{0};

  explicit Impl(MockScript s) : script(std::move(s)) {}

  ~Impl() {
    server.stop();
    if (thread.joinable()) thread.join();
  }

  void note_inflight_enter() {
    const int now = ++inflight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
  }

  void handle_chat(const httplib::Request& req, httplib::Response& res) {
    note_inflight_enter();
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      res.set_content(R"({"error":"invalid JSON"})", "application/json");
      --inflight;
      return;
    }
    const std::string prompt = extract_prompt(body);
    {
      std::lock_guard lock(mu);
      log.push_back({req.path, prompt, req.body});
    }

    double delay_s = 0.0;
    int fail_status = 0;
    std::string reply;
    bool matched = false;
    {
      std::lock_guard lock(mu);
      for (auto& rule : script.rules) {
        if (rule.remaining_uses == 0) continue;
        if (prompt.find(rule.match_substring) == std::string::npos) continue;
        matched = true;
        delay_s = rule.latency_s;
        if (rule.fail_times > 0) {
          --rule.fail_times;
          fail_status = rule.fail_status;
        } else {
          if (rule.remaining_uses > 0) --rule.remaining_uses;
          reply = rule.response_text;
        }
        break;
      }
    }

    if (delay_s > 0)
      std::this_thread::sleep_for(std::chrono::microseconds(static_cast<long>(delay_s * 1e6)));

    if (matched) {
      if (fail_status != 0) {
        res.status = fail_status;
        res.set_content(R"({"error":"scripted failure"})", "application/json");
      } else {
        res.set_content(chat_reply(reply).dump(), "application/json");
      }
    } else if (script.handler) {
      res.set_content(chat_reply(script.handler(prompt)).dump(), "application/json");
    } else if (script.strict) {
      {
        std::lock_guard lock(mu);
        ++unmatched;
      }
      res.status = 422;
      res.set_content(R"({"error":"script exhausted: no rule matches request"})",
                      "application/json");
    } else {
      res.set_content(chat_reply(prompt).dump(), "application/json");  // echo
    }
    --inflight;
  }

  void handle_images(const httplib::Request& req, httplib::Response& res) {
    note_inflight_enter();
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      res.set_content(R"({"error":"invalid JSON"})", "application/json");
      --inflight;
      return;
    }
    const std::string prompt = extract_prompt(body);
    {
      std::lock_guard lock(mu);
      log.push_back({req.path, prompt, req.body});
    }
    const auto seed = body.value("seed", std::uint64_t{0});
    const json reply = {
        {"created", 0},
        {"data", json::array({{{"b64_json", base64_encode(mock_image_payload(prompt, seed))}}})},
    };
    res.set_content(reply.dump(), "application/json");
    --inflight;
  }
};

MockServer::MockServer(MockScript script) : impl_(std::make_unique<Impl>(std::move(script))) {
  impl_->server.new_task_queue = [] { return new httplib::ThreadPool(64); };
  impl_->server.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
    impl_->handle_chat(req, res);
  });
  impl_->server.Post("/v1/images/generations", [this](const httplib::Request& req,
                                                      httplib::Response& res) {
    impl_->handle_images(req, res);
  });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw std::runtime_error("mock server failed to bind a port");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  while (!impl_->server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
}

MockServer::~MockServer() = default;

int MockServer::port() const { return impl_->port; }

std::string MockServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

std::vector<RecordedRequest> MockServer::requests() const {
  std::lock_guard lock(impl_->mu);
  return impl_->log;
}

std::size_t MockServer::request_count() const {
  std::lock_guard lock(impl_->mu);
  return impl_->log.size();
}

int MockServer::peak_inflight() const { return impl_->peak.load(); }

std::size_t MockServer::unmatched_count() const {
  std::lock_guard lock(impl_->mu);
  return impl_->unmatched;
}

}  // namespace parrot
