#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace parrot {

struct GatewayError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Timeout : GatewayError {
  Timeout() : GatewayError("request timed out") {}
};
struct TransportError : GatewayError {
  explicit TransportError(const std::string& what) : GatewayError("transport error: " + what) {}
};
struct ServerError : GatewayError {
  explicit ServerError(int status)
      : GatewayError("server error: HTTP " + std::to_string(status)), status(status) {}
  int status;
};
struct RateLimited : GatewayError {
  RateLimited() : GatewayError("rate limited (HTTP 429)") {}
};
struct BudgetExceeded : GatewayError {
  explicit BudgetExceeded(int attempts)
      : GatewayError("retry budget exhausted after " + std::to_string(attempts) + " attempts") {}
};

// One of: filesystem path, URL, or inline base64 payload.
struct ImageRef {
  enum class Kind { Path, Url, Inline };
  Kind kind = Kind::Path;
  std::string location;    // path or URL
  std::string payload;     // decoded bytes for Inline
  std::string media_type = "image/png";

  static ImageRef from_path(std::string path);
  static ImageRef from_url(std::string url);
  static ImageRef inline_bytes(std::string bytes, std::string media_type = "image/png");
  // Heuristic: data URLs become Inline, http(s) become Url, else Path.
  static ImageRef from_string(const std::string& s);

  // data:<media>;base64,<payload> form used on the wire.
  std::string to_data_url() const;
};

struct MessagePart {
  std::optional<std::string> text;
  std::optional<ImageRef> image;

  static MessagePart from_text(std::string t);
  static MessagePart from_image(ImageRef r);
};

struct ChatMessage {
  std::string role = "user";  // system | user | assistant
  std::vector<MessagePart> parts;

  static ChatMessage user_text(std::string text);
};

struct EndpointConfig {
  std::string base_url;
  std::string model = "default";
  double timeout_s = 30.0;
  int max_retries = 3;
  int max_inflight = 4;
  double temperature = 0.0;
  int max_tokens = 4096;
  double backoff_base_s = 0.5;  // exponential, factor 2, full jitter
  std::string api_key;          // optional bearer token

  void validate() const;
};

struct GenerationRequest {
  std::string prompt;
  std::optional<ImageRef> source;
  std::uint64_t seed = 0;
};

struct GenerationResult {
  ImageRef image;
  double latency_s = 0.0;
};

// Chat-completions client for one endpoint. Shareable across threads; the
// in-flight cap is enforced internally.
class GatewayClient {
 public:
  explicit GatewayClient(EndpointConfig cfg);
  ~GatewayClient();
  GatewayClient(GatewayClient&&) noexcept;
  GatewayClient& operator=(GatewayClient&&) noexcept;

  std::string complete(const std::vector<ChatMessage>& messages) const;
  std::string complete(const std::vector<ChatMessage>& messages,
                       std::optional<double> temperature_override) const;
  GenerationResult generate_image(const GenerationRequest& req) const;

  const EndpointConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace parrot
