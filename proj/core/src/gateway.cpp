#include "parrot/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "parrot/util.hpp"

namespace parrot {

using nlohmann::json;

ImageRef ImageRef::from_path(std::string path) {
  ImageRef r;
  r.kind = Kind::Path;
  r.location = std::move(path);
  return r;
}

ImageRef ImageRef::from_url(std::string url) {
  ImageRef r;
  r.kind = Kind::Url;
  r.location = std::move(url);
  return r;
}

ImageRef ImageRef::inline_bytes(std::string bytes, std::string media_type) {
  if (bytes.empty()) throw std::invalid_argument("inline image payload is empty");
  ImageRef r;
  r.kind = Kind::Inline;
  r.payload = std::move(bytes);
  r.media_type = std::move(media_type);
  return r;
}

ImageRef ImageRef::from_string(const std::string& s) {
  if (s.rfind("data:", 0) == 0) {
    const std::size_t comma = s.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("malformed data URL");
    std::string header = s.substr(5, comma - 5);  // e.g. image/png;base64
    const std::size_t semi = header.find(';');
    std::string media = semi == std::string::npos ? header : header.substr(0, semi);
    return inline_bytes(base64_decode(s.substr(comma + 1)), media);
  }
  if (s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0) return from_url(s);
  return from_path(s);
}

std::string ImageRef::to_data_url() const {
  switch (kind) {
    case Kind::Url:
      return location;
    case Kind::Inline:
      return "data:" + media_type + ";base64," + base64_encode(payload);
    case Kind::Path: {
      std::ifstream in(location, std::ios::binary);
      if (!in) throw std::runtime_error("cannot read image file: " + location);
      std::ostringstream ss;
      ss << in.rdbuf();
      const std::string bytes = ss.str();
      if (bytes.empty()) throw std::runtime_error("empty image file: " + location);
      return "data:" + media_type + ";base64," + base64_encode(bytes);
    }
  }
  throw std::logic_error("unreachable");
}

MessagePart MessagePart::from_text(std::string t) {
  MessagePart p;
  p.text = std::move(t);
  return p;
}

MessagePart MessagePart::from_image(ImageRef r) {
  MessagePart p;
  p.image = std::move(r);
  return p;
}

ChatMessage ChatMessage::user_text(std::string text) {
  ChatMessage m;
  m.role = "user";
  m.parts.push_back(MessagePart::from_text(std::move(text)));
  return m;
}

void EndpointConfig::validate() const {
  if (base_url.empty()) throw std::invalid_argument("endpoint base_url is empty");
  if (timeout_s <= 0) throw std::invalid_argument("endpoint timeout must be > 0");
  if (max_inflight < 1) throw std::invalid_argument("endpoint max_inflight must be >= 1");
  if (max_retries < 0) throw std::invalid_argument("endpoint max_retries must be >= 0");
  if (temperature < 0) throw std::invalid_argument("endpoint temperature must be >= 0");
}

namespace {

// Counting semaphore with a runtime cap; the per-endpoint in-flight gate.
class InflightGate {
 public:
  explicit InflightGate(int cap) : cap_(cap) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return count_ < cap_; });
    ++count_;
  }

  void release() {
    {
      std::lock_guard lock(mu_);
      --count_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int cap_;
  int count_ = 0;
};

struct GateGuard {
  InflightGate& gate;
  explicit GateGuard(InflightGate& g) : gate(g) { gate.acquire(); }
  ~GateGuard() { gate.release(); }
};

double jitter_fraction() {
  thread_local std::mt19937_64 rng(
      std::random_device{}() ^
      static_cast<std::uint64_t>(std::hash<std::thread::id>{}(std::this_thread::get_id())));
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool is_timeout(httplib::Error err) {
  return err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
         err == httplib::Error::Write;
}

json message_to_json(const ChatMessage& m) {
  json content = json::array();
  for (const auto& part : m.parts) {
    if (part.text.has_value()) {
      content.push_back({{"type", "text"}, {"text", *part.text}});
    } else if (part.image.has_value()) {
      content.push_back(
          {{"type", "image_url"}, {"image_url", {{"url", part.image->to_data_url()}}}});
    }
  }
  return {{"role", m.role}, {"content", content}};
}

}  // namespace

struct GatewayClient::Impl {
  EndpointConfig cfg;
  mutable InflightGate gate;

  explicit Impl(EndpointConfig c) : cfg(std::move(c)), gate(cfg.max_inflight) {}

  httplib::Client make_http() const {
    httplib::Client http(cfg.base_url);
    const auto secs = static_cast<time_t>(cfg.timeout_s);
    const auto usecs = static_cast<time_t>((cfg.timeout_s - static_cast<double>(secs)) * 1e6);
    http.set_connection_timeout(secs, usecs);
    http.set_read_timeout(secs, usecs);
    http.set_write_timeout(secs, usecs);
    if (!cfg.api_key.empty()) http.set_bearer_token_auth(cfg.api_key);
    return http;
  }

  // Runs one POST with the retry/backoff policy; returns the response body.
  std::string post_with_retries(const std::string& path, const std::string& body) const {
    GateGuard guard(gate);
    std::exception_ptr last_error;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
      if (attempt > 0) {
        const double cap_s = cfg.backoff_base_s * std::pow(2.0, attempt - 1);
        const auto sleep_us = static_cast<long>(cap_s * jitter_fraction() * 1e6);
        std::this_thread::sleep_for(std::chrono::microseconds(sleep_us));
      }
      try {
        httplib::Client http = make_http();
        auto res = http.Post(path, body, "application/json");
        if (!res) {
          if (is_timeout(res.error())) throw Timeout();
          throw TransportError(httplib::to_string(res.error()));
        }
        if (res->status == 429) throw RateLimited();
        if (res->status >= 500) throw ServerError(res->status);
        if (res->status >= 400) throw ServerError(res->status);  // not retryable
        return res->body;
      } catch (const Timeout&) {
        last_error = std::current_exception();
      } catch (const RateLimited&) {
        last_error = std::current_exception();
      } catch (const TransportError&) {
        last_error = std::current_exception();
      } catch (const ServerError& e) {
        if (e.status < 500) throw;  // client errors are final
        last_error = std::current_exception();
      }
    }
    if (cfg.max_retries == 0 && last_error) std::rethrow_exception(last_error);
    throw BudgetExceeded(cfg.max_retries + 1);
  }
};

GatewayClient::GatewayClient(EndpointConfig cfg) {
  cfg.validate();
  impl_ = std::make_unique<Impl>(std::move(cfg));
}

GatewayClient::~GatewayClient() = default;
GatewayClient::GatewayClient(GatewayClient&&) noexcept = default;
GatewayClient& GatewayClient::operator=(GatewayClient&&) noexcept = default;

const EndpointConfig& GatewayClient::config() const { return impl_->cfg; }

std::string GatewayClient::complete(const std::vector<ChatMessage>& messages) const {
  return complete(messages, std::nullopt);
}

std::string GatewayClient::complete(const std::vector<ChatMessage>& messages,
                                    std::optional<double> temperature_override) const {
  if (messages.empty()) throw std::invalid_argument("messages must be non-empty");
  json body = {
      {"model", impl_->cfg.model},
      {"temperature", temperature_override.value_or(impl_->cfg.temperature)},
      {"max_tokens", impl_->cfg.max_tokens},
      {"messages", json::array()},
  };
  for (const auto& m : messages) body["messages"].push_back(message_to_json(m));

  const std::string reply = impl_->post_with_retries("/v1/chat/completions", body.dump());
  try {
    const json parsed = json::parse(reply);
    const auto& content = parsed.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    // Content may itself be a part array.
    std::string text;
    for (const auto& part : content) {
      if (part.contains("text")) text += part["text"].get<std::string>();
    }
    return text;
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed completion response: ") + e.what());
  }
}

GenerationResult GatewayClient::generate_image(const GenerationRequest& req) const {
  if (trim(req.prompt).empty()) throw std::invalid_argument("generation prompt is empty");
  json body = {
      {"model", impl_->cfg.model},
      {"prompt", req.prompt},
      {"seed", req.seed},
  };
  if (req.source.has_value()) body["image"] = req.source->to_data_url();

  const auto start = std::chrono::steady_clock::now();
  const std::string reply = impl_->post_with_retries("/v1/images/generations", body.dump());
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);

  try {
    const json parsed = json::parse(reply);
    const std::string b64 = parsed.at("data").at(0).at("b64_json").get<std::string>();
    GenerationResult result;
    result.image = ImageRef::inline_bytes(base64_decode(b64));
    result.latency_s = elapsed.count();
    return result;
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed generation response: ") + e.what());
  }
}

}  // namespace parrot
