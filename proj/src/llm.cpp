#include "dialectrag/llm.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

#include "dialectrag/hashing.hpp"
#include "dialectrag/http.hpp"

namespace dialectrag::llm {

void ModelConfig::validate() const {
  if (model.empty()) throw Error(ErrorCode::InvalidArgument, "model name is required");
  if (temperature < 0.0) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
  if (max_retries < 0) throw Error(ErrorCode::InvalidArgument, "max_retries must be >= 0");
  if (max_tokens < 1) throw Error(ErrorCode::InvalidArgument, "max_tokens must be >= 1");
}

ModelConfig ModelConfig::from_env(ModelConfig base) {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("LLM_URL")) base.endpoint = *v;
  if (auto v = env("LLM_API_KEY")) base.api_key = *v;
  if (auto v = env("LLM_MODEL")) base.model = *v;
  return base;
}

nlohmann::json request_body(const prompt::FewShotPrompt& prompt, const ModelConfig& cfg) {
  return {
      {"model", cfg.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt.text}}})},
      {"temperature", cfg.temperature},
      {"max_tokens", cfg.max_tokens},
  };
}

std::string request_hash(const prompt::FewShotPrompt& prompt, const ModelConfig& cfg) {
  return sha256_hex(request_body(prompt, cfg).dump());
}

std::string prompt_id(const prompt::FewShotPrompt& prompt) { return sha256_hex(prompt.text).substr(0, 16); }

std::string postprocess_output(std::string_view content) {
  auto trim = [](std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return std::string_view();
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
  };
  std::string_view line;
  while (!content.empty()) {
    const auto nl = content.find('\n');
    line = trim(content.substr(0, nl));
    if (!line.empty()) break;
    content = nl == std::string_view::npos ? std::string_view() : content.substr(nl + 1);
  }
  static constexpr std::pair<std::string_view, std::string_view> kQuotes[] = {
      {"\"", "\""}, {"'", "'"}, {"“", "”"}, {"‘", "’"}, {"«", "»"}, {"`", "`"}};
  for (const auto& [open, close] : kQuotes) {
    if (line.size() >= open.size() + close.size() && line.starts_with(open) && line.ends_with(close)) {
      line = trim(line.substr(open.size(), line.size() - open.size() - close.size()));
      break;
    }
  }
  return std::string(line);
}

// ---------------------------------------------------------------------------
// Transports

TransportResponse HttpTransport::post(const std::string&, const std::string& body, const ModelConfig& cfg) {
  if (cfg.endpoint.empty()) throw Error(ErrorCode::InvalidArgument, "no chat endpoint configured (LLM_URL)");
  http::Url url = http::parse_url(cfg.endpoint);
  std::string path = "/chat/completions";
  if (url.path.ends_with(path)) path.clear();

  std::vector<std::pair<std::string, std::string>> headers;
  if (!cfg.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + cfg.api_key);

  const auto start = std::chrono::steady_clock::now();
  std::string transport_error;
  bool timed_out = false;
  auto response = http::post_json(url, path, body, cfg.timeout, headers, &transport_error, &timed_out);
  const auto elapsed = std::chrono::duration_cast<milliseconds>(std::chrono::steady_clock::now() - start);
  if (!response) {
    throw Error(timed_out ? ErrorCode::Timeout : ErrorCode::ProviderUnavailable, "chat endpoint: " + transport_error);
  }
  return {response->status, std::move(response->body), elapsed};
}

nlohmann::json to_json(const FixtureEntry& e) {
  nlohmann::json j = {
      {"request_hash", e.request_hash}, {"status", e.status}, {"body", e.body}, {"delay_ms", e.delay_ms}};
  if (!e.key_hash.empty()) j["key_hash"] = e.key_hash;
  return j;
}

FixtureEntry fixture_from_json(const nlohmann::json& j) {
  FixtureEntry e;
  e.request_hash = j.at("request_hash").get<std::string>();
  e.status = j.at("status").get<int>();
  const auto& body = j.at("body");
  e.body = body.is_string() ? body.get<std::string>() : body.dump();
  e.delay_ms = j.value("delay_ms", 0);
  e.key_hash = j.value("key_hash", "");
  return e;
}

std::vector<FixtureEntry> read_fixtures(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::vector<FixtureEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      entries.push_back(fixture_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(line_no, std::string("fixture: ") + e.what());
    }
  }
  return entries;
}

void write_fixtures(const std::filesystem::path& path, const std::vector<FixtureEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  for (const auto& e : entries) out << to_json(e).dump() << '\n';
}

ReplayTransport::ReplayTransport(std::vector<FixtureEntry> entries, bool simulate_delay)
    : simulate_delay_(simulate_delay) {
  for (auto& e : entries) scripts_[e.request_hash].entries.push_back(std::move(e));
}

std::shared_ptr<ReplayTransport> ReplayTransport::from_file(const std::filesystem::path& path, bool simulate_delay) {
  return std::make_shared<ReplayTransport>(read_fixtures(path), simulate_delay);
}

TransportResponse ReplayTransport::post(const std::string& request_hash, const std::string&, const ModelConfig&) {
  FixtureEntry entry;
  {
    std::lock_guard lock(mutex_);
    const auto it = scripts_.find(request_hash);
    if (it == scripts_.end()) {
      throw Error(ErrorCode::FixtureMiss, "no replay fixture for request " + request_hash.substr(0, 16));
    }
    Script& s = it->second;
    entry = s.entries[std::min(s.next, s.entries.size() - 1)];
    if (s.next < s.entries.size()) s.next++;
  }
  if (simulate_delay_ && entry.delay_ms > 0) std::this_thread::sleep_for(milliseconds(entry.delay_ms));
  if (entry.status == 0) throw Error(ErrorCode::Timeout, "replayed transport failure");
  return {entry.status, std::move(entry.body), milliseconds(entry.delay_ms)};
}

RecordingTransport::RecordingTransport(std::shared_ptr<Transport> inner, std::filesystem::path path)
    : inner_(std::move(inner)), path_(std::move(path)) {}

TransportResponse RecordingTransport::post(const std::string& request_hash, const std::string& body,
                                           const ModelConfig& cfg) {
  FixtureEntry entry;
  entry.request_hash = request_hash;
  if (!cfg.api_key.empty()) entry.key_hash = sha256_hex(cfg.api_key).substr(0, 16);
  TransportResponse response;
  try {
    response = inner_->post(request_hash, body, cfg);
    entry.status = response.status;
    entry.body = response.body;
    entry.delay_ms = static_cast<int>(response.elapsed.count());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Timeout && e.code() != ErrorCode::ProviderUnavailable) throw;
    entry.status = 0;  // replays as a transport failure
    std::lock_guard lock(mutex_);
    std::ofstream(path_, std::ios::binary | std::ios::app) << to_json(entry).dump() << '\n';
    throw;
  }
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot append to '" + path_.string() + "'");
  out << to_json(entry).dump() << '\n';
  return response;
}

// ---------------------------------------------------------------------------
// Client

milliseconds backoff_delay(const RetryPolicy& policy, int retry) {
  double ms = static_cast<double>(policy.base.count());
  for (int i = 0; i < retry; ++i) ms *= policy.factor;
  return milliseconds(static_cast<milliseconds::rep>(ms));
}

ChatClient::ChatClient(ModelConfig config, std::shared_ptr<Transport> transport, RetryPolicy retry)
    : config_(std::move(config)), transport_(std::move(transport)), retry_(std::move(retry)) {
  config_.validate();
  if (!transport_) throw Error(ErrorCode::InvalidArgument, "transport is required");
}

std::string ChatClient::scrub(std::string message) const {
  if (config_.api_key.empty()) return message;
  std::size_t pos = 0;
  while ((pos = message.find(config_.api_key, pos)) != std::string::npos) {
    message.replace(pos, config_.api_key.size(), "***");
  }
  return message;
}

namespace {

enum class Outcome { Success, Retryable, Fatal };

std::string error_detail(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    if (j.is_object() && j.contains("error")) {
      const auto& err = j["error"];
      if (err.is_string()) return err.get<std::string>();
      if (err.is_object() && err.contains("message") && err["message"].is_string()) {
        return err["message"].get<std::string>();
      }
    }
  } catch (const nlohmann::json::exception&) {
  }
  return body.substr(0, 200);
}

// Message text without the "Code: " prefix.
std::string detail(const Error& e) {
  const std::string what = e.what();
  const std::string prefix = std::string(to_string(e.code())) + ": ";
  return what.starts_with(prefix) ? what.substr(prefix.size()) : what;
}

}  // namespace

TranslationResult ChatClient::translate(const prompt::FewShotPrompt& prompt) const {
  const std::string body = request_body(prompt, config_).dump();
  const std::string hash = sha256_hex(body);
  const bool deterministic = transport_->deterministic();
  std::mt19937_64 rng(std::random_device{}());

  TranslationResult result;
  result.prompt_id = prompt_id(prompt);
  result.model = config_.model;

  ErrorCode last_code = ErrorCode::ProviderUnavailable;
  std::string last_message;
  const int max_attempts = 1 + config_.max_retries;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    result.attempts = attempt;
    if (attempt > 1) {
      milliseconds delay = backoff_delay(retry_, attempt - 2);
      if (!deterministic && retry_.jitter > 0.0) {
        std::uniform_real_distribution<double> extra(0.0, retry_.jitter * static_cast<double>(delay.count()));
        delay += milliseconds(static_cast<milliseconds::rep>(extra(rng)));
      }
      if (retry_.sleep) {
        retry_.sleep(delay);
      } else if (!deterministic) {
        std::this_thread::sleep_for(delay);
      }
    }

    TransportResponse response;
    try {
      response = transport_->post(hash, body, config_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Timeout && e.code() != ErrorCode::ProviderUnavailable) {
        throw Error(e.code(), scrub(detail(e)));
      }
      last_code = e.code();
      last_message = scrub(detail(e));
      continue;
    }
    result.latency += response.elapsed;

    const int status = response.status;
    if (status == 401 || status == 403) {
      throw Error(ErrorCode::AuthError, "HTTP " + std::to_string(status) + ": " + scrub(error_detail(response.body)));
    }
    if (status == 429 || status >= 500 || status == 408) {
      last_code = status == 429 ? ErrorCode::RateLimited : status == 408 ? ErrorCode::Timeout : ErrorCode::ServerError;
      last_message = "HTTP " + std::to_string(status) + ": " + scrub(error_detail(response.body));
      continue;
    }
    if (status < 200 || status >= 300) {
      throw Error(ErrorCode::RequestRejected,
                  "HTTP " + std::to_string(status) + ": " + scrub(error_detail(response.body)));
    }

    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(response.body);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::MalformedResponse, "response body is not JSON");
    }
    if (!parsed.is_object() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty()) {
      throw Error(ErrorCode::MalformedResponse, "response has no choices");
    }
    const auto& choice = parsed["choices"][0];
    const auto message = choice.value("message", nlohmann::json::object());
    if ((message.contains("refusal") && message["refusal"].is_string()) ||
        choice.value("finish_reason", nlohmann::json()) == "content_filter") {
      throw Error(ErrorCode::ContentFiltered, "the model declined to answer");
    }
    if (!message.contains("content") || !message["content"].is_string()) {
      throw Error(ErrorCode::MalformedResponse, "first choice has no message content");
    }
    result.output_text = postprocess_output(message["content"].get<std::string>());
    if (parsed.contains("usage") && parsed["usage"].is_object()) {
      const auto& u = parsed["usage"];
      result.usage = Usage{u.value("prompt_tokens", 0), u.value("completion_tokens", 0)};
    }
    return result;
  }
  throw Error(last_code, "gave up after " + std::to_string(max_attempts) + " attempts: " + last_message);
}

std::vector<BatchItem> ChatClient::translate_batch(std::span<const prompt::FewShotPrompt> prompts,
                                                   std::size_t parallelism) const {
  if (parallelism == 0) throw Error(ErrorCode::InvalidArgument, "parallelism must be >= 1");
  std::vector<BatchItem> items(prompts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      try {
        items[i].result = translate(prompts[i]);
      } catch (const Error& e) {
        items[i].error = e.code();
        items[i].error_message = e.what();
      }
    }
  };
  std::vector<std::jthread> pool;
  const std::size_t workers = std::min(parallelism, prompts.size());
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  return items;
}

}  // namespace dialectrag::llm
