#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialectrag/error.hpp"
#include "dialectrag/prompt.hpp"

namespace dialectrag::llm {

using std::chrono::milliseconds;

struct ModelConfig {
  std::string endpoint;  // base URL or full .../chat/completions URL
  std::string model;
  double temperature = 0.0;
  int max_tokens = 256;
  milliseconds timeout{60000};
  int max_retries = 3;
  std::string api_key;  // never logged or persisted

  void validate() const;

  /// LLM_URL, LLM_API_KEY, LLM_MODEL over `base`.
  static ModelConfig from_env(ModelConfig base);
};

inline ModelConfig config_from_env() { return ModelConfig::from_env(ModelConfig{}); }

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct TranslationResult {
  std::string output_text;
  std::string prompt_id;
  std::string model;
  milliseconds latency{0};
  int attempts = 0;
  std::optional<Usage> usage;
};

/// Chat-completions request body for one user message.
nlohmann::json request_body(const prompt::FewShotPrompt& prompt, const ModelConfig& cfg);

/// SHA-256 of the canonical request body; the API key is not part of it.
std::string request_hash(const prompt::FewShotPrompt& prompt, const ModelConfig& cfg);

std::string prompt_id(const prompt::FewShotPrompt& prompt);

/// First nonempty line, trimmed, with one pair of surrounding quotes removed.
std::string postprocess_output(std::string_view content);

// ---------------------------------------------------------------------------
// Transports

struct TransportResponse {
  int status = 0;
  std::string body;
  milliseconds elapsed{0};
};

/// Throws Error(Timeout | ProviderUnavailable) on transport failure and
/// Error(FixtureMiss) when a replay fixture has no entry.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResponse post(const std::string& request_hash, const std::string& body,
                                 const ModelConfig& cfg) = 0;
  /// Replay transports are deterministic: no jitter, no backoff sleeps.
  virtual bool deterministic() const { return false; }
};

class HttpTransport final : public Transport {
 public:
  TransportResponse post(const std::string& request_hash, const std::string& body, const ModelConfig& cfg) override;
};

/// One fixture line: {"request_hash", "status", "body", "delay_ms"}.
struct FixtureEntry {
  std::string request_hash;
  int status = 200;
  std::string body;
  int delay_ms = 0;
  std::string key_hash;  // optional; hash of the key used when recording
};

nlohmann::json to_json(const FixtureEntry& e);
FixtureEntry fixture_from_json(const nlohmann::json& j);
std::vector<FixtureEntry> read_fixtures(const std::filesystem::path& path);
void write_fixtures(const std::filesystem::path& path, const std::vector<FixtureEntry>& entries);

/// Answers from fixtures. Entries sharing a request hash are served in file
/// order; the last one repeats once the sequence is used up. `delay_ms` is
/// slept (when `simulate_delay`) and reported as the elapsed time.
class ReplayTransport final : public Transport {
 public:
  explicit ReplayTransport(std::vector<FixtureEntry> entries, bool simulate_delay = true);
  static std::shared_ptr<ReplayTransport> from_file(const std::filesystem::path& path, bool simulate_delay = true);

  TransportResponse post(const std::string& request_hash, const std::string& body, const ModelConfig& cfg) override;
  bool deterministic() const override { return true; }

 private:
  struct Script {
    std::vector<FixtureEntry> entries;
    std::size_t next = 0;
  };
  std::mutex mutex_;
  std::map<std::string, Script> scripts_;
  bool simulate_delay_;
};

/// Forwards to `inner` and appends every exchange to a fixture file.
class RecordingTransport final : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner, std::filesystem::path path);

  TransportResponse post(const std::string& request_hash, const std::string& body, const ModelConfig& cfg) override;

 private:
  std::shared_ptr<Transport> inner_;
  std::filesystem::path path_;
  std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Client

struct RetryPolicy {
  milliseconds base{500};
  double factor = 2.0;
  double jitter = 0.25;  // up to this fraction of the delay is added at random
  std::function<void(milliseconds)> sleep;  // null: std::this_thread::sleep_for
};

/// Delay before retry number `retry` (0-based), without jitter.
milliseconds backoff_delay(const RetryPolicy& policy, int retry);

struct BatchItem {
  std::optional<TranslationResult> result;
  std::optional<ErrorCode> error;
  std::string error_message;

  bool ok() const noexcept { return result.has_value(); }
};

class ChatClient {
 public:
  ChatClient(ModelConfig config, std::shared_ptr<Transport> transport, RetryPolicy retry = {});

  /// Sends the prompt as one user message and returns the first choice.
  /// Retries transport errors, 429 and 5xx with exponential backoff.
  TranslationResult translate(const prompt::FewShotPrompt& prompt) const;

  /// Results in input order; per-item failures are recorded, not thrown.
  std::vector<BatchItem> translate_batch(std::span<const prompt::FewShotPrompt> prompts,
                                         std::size_t parallelism) const;

  const ModelConfig& config() const noexcept { return config_; }

 private:
  std::string scrub(std::string message) const;

  ModelConfig config_;
  std::shared_ptr<Transport> transport_;
  RetryPolicy retry_;
};

}  // namespace dialectrag::llm
