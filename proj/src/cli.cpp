#include "dialectrag/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "dialectrag/corpus.hpp"
#include "dialectrag/embedding.hpp"
#include "dialectrag/eval.hpp"
#include "dialectrag/hashing.hpp"
#include "dialectrag/index.hpp"
#include "dialectrag/llm.hpp"
#include "dialectrag/pipeline.hpp"
#include "dialectrag/prompt.hpp"
#include "dialectrag/retrieve.hpp"

namespace dialectrag::cli {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) noexcept {
  if (is_network_error(code)) return kExitNetwork;
  if (code == ErrorCode::InvalidArgument) return kExitUsage;
  return kExitData;
}

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == '[') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw FormatError(line_no, "expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else if (const auto hash = value.find(" #"); hash != std::string::npos) {
      value = trim(value.substr(0, hash));
    }
    if (key.empty()) throw FormatError(line_no, "empty key");
    values[key] = value;
  }
  return values;
}

std::optional<std::string> Settings::lookup(const std::optional<std::string>& flag, const char* env_name,
                                            const char* file_key) const {
  if (flag) return flag;
  if (env_name != nullptr) {
    if (const char* v = std::getenv(env_name); v != nullptr && *v != '\0') return std::string(v);
  }
  if (file_key != nullptr) {
    if (auto it = file_.find(file_key); it != file_.end()) return it->second;
  }
  return std::nullopt;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << contents;
}

std::string file_sha(const std::optional<std::string>& path) {
  return path ? sha256_hex(read_file(*path)) : std::string();
}

template <typename T>
T parse_number(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    T v;
    if constexpr (std::is_floating_point_v<T>) {
      v = static_cast<T>(std::stod(text, &used));
    } else {
      const long long n = std::stoll(text, &used);
      if (n < 0) throw std::invalid_argument("negative");
      v = static_cast<T>(n);
    }
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be a number, got '" + text + "'");
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Options shared by the commands that talk to the model or the embedder.
struct Common {
  std::optional<std::string> config;
  std::optional<std::string> embed_url;
  std::optional<std::string> llm_url;
  std::optional<std::string> dim;
  std::optional<std::string> temperature;
  std::optional<std::string> max_tokens;
  std::optional<std::string> max_retries;
  std::optional<std::string> timeout_ms;
  std::optional<std::string> parallelism;
  std::optional<std::string> n;
  std::optional<std::string> deep;
  std::optional<std::string> templates;
};

Settings load_settings(const Common& c) {
  const char* env_path = std::getenv("DIALECTRAG_CONFIG");
  if (c.config) return Settings(read_config_file(*c.config));
  if (env_path != nullptr && *env_path != '\0') return Settings(read_config_file(env_path));
  return Settings();
}

int resolve_dim(const Settings& s, const Common& c) {
  const int dim = parse_number<int>(s.get(c.dim, "EMBED_DIM", "dim", std::to_string(embedding::kDefaultDim)), "dim");
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "dim must be >= 1");
  return dim;
}

std::unique_ptr<embedding::EmbeddingProvider> provider_for(const Settings& s, const Common& c, int dim) {
  return embedding::make_provider(dim, s.get(c.embed_url, "EMBED_URL", "embed_url", ""));
}

llm::ModelConfig model_config(const Settings& s, const Common& c, const std::string& model) {
  llm::ModelConfig cfg;
  cfg.endpoint = s.get(c.llm_url, "LLM_URL", "llm_url", "");
  cfg.api_key = s.get(std::nullopt, "LLM_API_KEY", "llm_api_key", "");
  cfg.model = model;
  cfg.temperature = parse_number<double>(s.get(c.temperature, "LLM_TEMPERATURE", "temperature", "0"), "temperature");
  cfg.max_tokens = parse_number<int>(s.get(c.max_tokens, "LLM_MAX_TOKENS", "max_tokens", "256"), "max_tokens");
  cfg.max_retries = parse_number<int>(s.get(c.max_retries, "LLM_MAX_RETRIES", "max_retries", "3"), "max_retries");
  cfg.timeout = llm::milliseconds(
      parse_number<long>(s.get(c.timeout_ms, "LLM_TIMEOUT_MS", "timeout_ms", "60000"), "timeout_ms"));
  cfg.validate();
  return cfg;
}

std::string model_config_hash(const llm::ModelConfig& cfg) {
  const json j = {{"endpoint", cfg.endpoint},       {"model", cfg.model},
                  {"temperature", cfg.temperature}, {"max_tokens", cfg.max_tokens},
                  {"max_retries", cfg.max_retries}, {"timeout_ms", cfg.timeout.count()}};
  return sha256_hex(j.dump());
}

std::vector<std::string> resolve_models(const Settings& s, const std::vector<std::string>& flags) {
  std::vector<std::string> models = flags;
  if (models.empty()) {
    if (auto m = s.lookup(std::nullopt, "LLM_MODEL", "llm_model")) models.push_back(*m);
  }
  if (models.empty()) throw Error(ErrorCode::InvalidArgument, "no model given (--model, LLM_MODEL or llm_model)");
  return models;
}

std::shared_ptr<llm::Transport> make_transport(const std::optional<std::string>& replay,
                                               const std::optional<std::string>& record) {
  if (replay && record) throw Error(ErrorCode::InvalidArgument, "--replay and --record are exclusive");
  if (replay) return llm::ReplayTransport::from_file(*replay, false);
  auto http = std::make_shared<llm::HttpTransport>();
  if (record) {
    write_file(*record, "");
    return std::make_shared<llm::RecordingTransport>(http, *record);
  }
  return http;
}

json fusion_json(const retrieve::FusionConfig& f) {
  return {{"w_dense", f.w_dense}, {"w_sparse", f.w_sparse}, {"k_dense", f.k_dense}, {"k_sparse", f.k_sparse}};
}

json config_snapshot(const pipeline::PipelineConfig& p, const prompt::Templates& templates) {
  const retrieve::BonusConfig bonuses;
  return {
      {"n", p.n},
      {"deep", retrieve::to_string(p.deep)},
      {"char_budget", p.build.char_budget},
      {"fusion",
       {{"p1", fusion_json(retrieve::kP1Fusion)},
        {"p2_standard", fusion_json(retrieve::kP2StandardFusion)},
        {"p2_short", fusion_json(retrieve::kP2ShortFusion)},
        {"deep_weights", {retrieve::kDeepDenseWeight, retrieve::kDeepSparseWeight}},
        {"short_query_tokens", retrieve::kShortQueryTokens},
        {"deep_min_unique", retrieve::kDeepSearchMinUnique}}},
      {"bonuses",
       {{"district", bonuses.district},
        {"exact", bonuses.exact},
        {"substring", bonuses.substring},
        {"char_sim", bonuses.char_sim}}},
      {"template_versions",
       {{"zero", templates.zero.version}, {"p1", templates.p1.version}, {"p2", templates.p2.version}}},
  };
}

pipeline::PipelineConfig pipeline_config(const Settings& s, const Common& c, prompt::Kind kind,
                                         const prompt::Templates* templates) {
  pipeline::PipelineConfig p;
  p.kind = kind;
  p.n = parse_number<std::size_t>(s.get(c.n, "DIALECTRAG_N", "n", "5"), "n");
  p.deep = retrieve::parse_deep_mode(s.get(c.deep, nullptr, "deep", "auto"));
  p.build.templates = templates;
  return p;
}

std::size_t resolve_parallelism(const Settings& s, const Common& c) {
  const auto p = parse_number<std::size_t>(s.get(c.parallelism, nullptr, "parallelism", "4"), "parallelism");
  if (p == 0) throw Error(ErrorCode::InvalidArgument, "parallelism must be >= 1");
  return p;
}

void add_common(CLI::App* cmd, Common& c, bool model_options) {
  cmd->add_option("--config", c.config, "key = value config file (also DIALECTRAG_CONFIG)");
  cmd->add_option("--embed-url", c.embed_url, "embedding service base URL (also EMBED_URL)");
  cmd->add_option("--dim", c.dim, "embedding dimension");
  if (!model_options) return;
  cmd->add_option("--llm-url", c.llm_url, "chat-completions endpoint (also LLM_URL)");
  cmd->add_option("--temperature", c.temperature);
  cmd->add_option("--max-tokens", c.max_tokens);
  cmd->add_option("--max-retries", c.max_retries);
  cmd->add_option("--timeout-ms", c.timeout_ms);
  cmd->add_option("--parallelism", c.parallelism, "concurrent model requests");
  cmd->add_option("--n", c.n, "few-shot budget");
  cmd->add_option("--deep", c.deep, "deep search: auto, on or off");
  cmd->add_option("--templates", c.templates, "directory with zero.txt, p1.txt, p2.txt");
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string input;
  std::string format = "pairs";
  std::string output;
  std::optional<std::string> stats;
  bool lenient = false;
  bool allow_unknown = false;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  corpus::IngestOptions options;
  options.strict = !a.lenient;
  options.allow_unknown_districts = a.allow_unknown;
  auto result = corpus::ingest(a.input, corpus::parse_format(a.format), options);
  if (result.records.empty()) throw Error(ErrorCode::EmptyCorpus, "no records accepted from '" + a.input + "'");
  std::ostringstream corpus_out;
  corpus::write_corpus(corpus_out, result.records);
  write_file(a.output, corpus_out.str());
  const std::string stats = corpus::to_json(result.stats).dump(2) + "\n";
  if (a.stats) write_file(*a.stats, stats);
  out << stats;
  for (const auto& r : result.stats.rejections) err << "rejected line " << r.line_no << ": " << r.reason << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// index

struct IndexArgs {
  std::string corpus;
  std::string output;
  Common common;
};

int cmd_index(const IndexArgs& a, std::ostream& out) {
  const Settings s = load_settings(a.common);
  const int dim = resolve_dim(s, a.common);
  auto records = corpus::read_corpus(a.corpus);
  auto provider = provider_for(s, a.common, dim);
  if (provider->dim() != dim) {
    throw Error(ErrorCode::DimensionMismatch, "--dim " + std::to_string(dim) + " but the provider returns " +
                                                  std::to_string(provider->dim()));
  }
  const auto index = index::build_hybrid(std::move(records), *provider);
  index::save(index, a.output);
  out << json{{"records", index.docs.size()},
              {"dim", index.dim()},
              {"model", index.model},
              {"format", corpus::to_string(index.format)},
              {"terms", index.sparse.postings().size()},
              {"output", a.output}}
             .dump(2)
      << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// query

struct QueryArgs {
  std::string index;
  std::string query;
  std::string dialect;
  std::string pipeline = "2";
  std::size_t k = 5;
  std::string deep = "auto";
  bool explain = false;
  Common common;
};

int cmd_query(const QueryArgs& a, std::ostream& out) {
  const Settings s = load_settings(a.common);
  const auto idx = index::load(a.index);
  auto provider = provider_for(s, a.common, idx.dim());
  const retrieve::Retriever retriever(idx, *provider);
  const auto kind = prompt::parse_kind(a.pipeline);
  if (kind == prompt::Kind::Zero) throw Error(ErrorCode::InvalidArgument, "query needs pipeline 1 or 2");
  const std::string dialect = retriever.resolve_dialect(a.dialect);
  const auto result = kind == prompt::Kind::P1
                          ? retriever.retrieve_p1(a.query, dialect, a.k)
                          : retriever.retrieve_p2(a.query, dialect, a.k, retrieve::parse_deep_mode(a.deep));
  if (a.explain) {
    out << retrieve::explain(result).dump(2) << '\n';
    return kExitOk;
  }
  json rows = json::array();
  for (std::size_t rank = 0; rank < result.candidates.size(); ++rank) {
    const auto& c = result.candidates[rank];
    const auto& rec = idx.docs[c.doc];
    rows.push_back({{"rank", rank + 1},
                    {"id", c.id},
                    {"district", c.district},
                    {"score", c.blended},
                    {"standard", rec.standard_norm},
                    {"text", rec.dialect_text()}});
  }
  out << json{{"query", a.query}, {"dialect", dialect}, {"results", rows}}.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// translate

struct TranslateArgs {
  std::optional<std::string> index;
  std::optional<std::string> input;
  std::optional<std::string> inputs;
  std::string dialect;
  std::string pipeline = "2";
  std::optional<std::string> model;
  bool dry_run = false;
  std::optional<std::string> replay;
  std::optional<std::string> record;
  std::optional<std::string> output;
  std::optional<std::string> manifest;
  Common common;
};

struct TranslateItem {
  std::string id;
  std::string input;
  std::string dialect;
};

std::vector<TranslateItem> read_inputs(const std::string& path, const std::string& default_dialect) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path);
  std::vector<TranslateItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (corpus::normalize_basic(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw FormatError(line_no, "not a JSON object");
    }
    if (!j.is_object()) throw FormatError(line_no, "not a JSON object");
    TranslateItem item;
    item.id = j.value("id", "input-" + std::to_string(line_no));
    item.input = j.contains("input") ? j.value("input", "") : j.value("standard", "");
    item.dialect = j.contains("dialect") ? j.value("dialect", "") : j.value("district", default_dialect);
    if (item.dialect.empty()) item.dialect = default_dialect;
    if (item.input.empty()) throw FormatError(line_no, "missing input");
    items.push_back(std::move(item));
  }
  return items;
}

int cmd_translate(const TranslateArgs& a, std::ostream& out, std::ostream& err) {
  const Settings s = load_settings(a.common);
  if (a.input.has_value() == a.inputs.has_value()) {
    throw Error(ErrorCode::InvalidArgument, "give exactly one of --input and --inputs");
  }
  std::optional<prompt::Templates> templates;
  if (auto dir = s.lookup(a.common.templates, nullptr, "templates")) templates = prompt::load_templates(*dir);
  const auto kind = prompt::parse_kind(a.pipeline);
  const auto pcfg = pipeline_config(s, a.common, kind, templates ? &*templates : nullptr);

  std::optional<index::HybridIndex> idx;
  std::unique_ptr<embedding::EmbeddingProvider> provider;
  std::optional<retrieve::Retriever> retriever;
  if (kind != prompt::Kind::Zero) {
    if (!a.index) throw Error(ErrorCode::InvalidArgument, "--index is required for pipelines 1 and 2");
    idx = index::load(*a.index);
    provider = provider_for(s, a.common, idx->dim());
    retriever.emplace(*idx, *provider);
  }

  std::vector<TranslateItem> items;
  if (a.input) {
    items.push_back({"input-1", *a.input, a.dialect});
  } else {
    items = read_inputs(*a.inputs, a.dialect);
  }

  std::vector<prompt::FewShotPrompt> prompts;
  for (const auto& item : items) {
    prompts.push_back(pipeline::build_prompt(item.input, item.dialect, pcfg, retriever ? &*retriever : nullptr));
  }
  if (a.dry_run) {
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      if (i) out << "\n---\n";
      out << prompts[i].text << '\n';
    }
    return kExitOk;
  }

  const std::vector<std::string> model_flags = a.model ? std::vector<std::string>{*a.model} : std::vector<std::string>{};
  const auto mcfg = model_config(s, a.common, resolve_models(s, model_flags).front());
  const llm::ChatClient client(mcfg, make_transport(a.replay, a.record));
  const auto results = client.translate_batch(prompts, resolve_parallelism(s, a.common));

  std::ostringstream lines;
  std::optional<ErrorCode> first_error;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    json row = {{"id", items[i].id}, {"input", prompts[i].input_sentence}, {"dialect", prompts[i].dialect},
                {"pipeline", prompt::to_string(kind)}, {"examples", prompts[i].n_used}};
    if (results[i].ok()) {
      const auto& r = *results[i].result;
      row["output"] = r.output_text;
      row["prompt_id"] = r.prompt_id;
      row["model"] = r.model;
      row["latency_ms"] = r.latency.count();
      row["attempts"] = r.attempts;
    } else {
      ++failures;
      if (!first_error) first_error = results[i].error;
      row["error"] = to_string(results[i].error.value_or(ErrorCode::ProviderUnavailable));
      row["message"] = results[i].error_message;
      err << items[i].id << ": " << results[i].error_message << '\n';
    }
    lines << row.dump() << '\n';
  }
  if (a.output) {
    write_file(*a.output, lines.str());
  } else {
    out << lines.str();
  }

  fs::path manifest_path = a.manifest ? fs::path(*a.manifest)
                           : a.output ? fs::path(*a.output + ".manifest.json")
                                      : fs::path("translate_manifest.json");
  const prompt::Templates& tpl = templates ? *templates : prompt::default_templates();
  json manifest = {
      {"tool_version", kToolVersion},
      {"timestamp", utc_timestamp()},
      {"command", "translate"},
      {"pipeline", prompt::to_string(kind)},
      {"config", config_snapshot(pcfg, tpl)},
      {"model", {{"name", mcfg.model}, {"config_hash", model_config_hash(mcfg)}}},
      {"index_checksum", file_sha(a.index)},
      {"inputs_checksum", file_sha(a.inputs)},
      {"replay", a.replay.has_value()},
      {"fixture_checksum", file_sha(a.replay)},
  };
  write_file(manifest_path, manifest.dump(2) + "\n");

  if (failures == results.size() && first_error) return exit_code_for(*first_error);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string pairs;
  std::vector<std::string> pipelines{"zero", "1", "2"};
  std::vector<std::string> models;
  std::optional<std::string> p1_index;
  std::optional<std::string> p2_index;
  std::optional<std::string> replay;
  std::optional<std::string> record;
  std::string out_dir = "reports";
  std::optional<std::string> heatmap_csv;
  std::optional<std::string> fixture_from_references;
  Common common;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const Settings s = load_settings(a.common);
  std::optional<prompt::Templates> templates;
  if (auto dir = s.lookup(a.common.templates, nullptr, "templates")) templates = prompt::load_templates(*dir);
  const prompt::Templates& tpl = templates ? *templates : prompt::default_templates();

  const auto pairs = eval::read_pairs(a.pairs);
  if (pairs.empty()) throw Error(ErrorCode::EmptyCorpus, "no evaluation pairs in '" + a.pairs + "'");
  const auto models = resolve_models(s, a.models);
  const std::size_t parallelism = resolve_parallelism(s, a.common);

  std::vector<prompt::Kind> kinds;
  for (const auto& p : a.pipelines) kinds.push_back(prompt::parse_kind(p));

  // One retriever per retrieval pipeline, each over its own index.
  struct Retrieval {
    index::HybridIndex index;
    std::unique_ptr<embedding::EmbeddingProvider> provider;
    std::unique_ptr<retrieve::Retriever> retriever;
  };
  std::map<prompt::Kind, Retrieval> retrieval;
  for (auto kind : kinds) {
    if (kind == prompt::Kind::Zero || retrieval.contains(kind)) continue;
    const auto& path = kind == prompt::Kind::P1 ? a.p1_index : a.p2_index;
    if (!path) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string("pipeline ") + std::string(prompt::to_string(kind)) + " needs --" +
                      (kind == prompt::Kind::P1 ? "p1" : "p2") + "-index");
    }
    Retrieval r;
    r.index = index::load(*path);
    r.provider = provider_for(s, a.common, r.index.dim());
    auto& slot = retrieval[kind] = std::move(r);
    slot.retriever = std::make_unique<retrieve::Retriever>(slot.index, *slot.provider);
  }
  auto retriever_for = [&](prompt::Kind kind) -> const retrieve::Retriever* {
    auto it = retrieval.find(kind);
    return it == retrieval.end() ? nullptr : it->second.retriever.get();
  };

  // Dialect groups in sorted order; pairs keep file order inside a group.
  std::map<std::string, std::vector<eval::EvalPair>> groups;
  for (const auto& p : pairs) groups[p.dialect].push_back(p);

  if (a.fixture_from_references) {
    std::vector<llm::FixtureEntry> entries;
    std::set<std::string> seen;
    for (auto kind : kinds) {
      const auto pcfg = pipeline_config(s, a.common, kind, templates ? &*templates : nullptr);
      for (const auto& model : models) {
        const auto mcfg = model_config(s, a.common, model);
        for (const auto& p : pairs) {
          const auto prompt = pipeline::build_prompt(p.input, p.dialect, pcfg, retriever_for(kind));
          llm::FixtureEntry e;
          e.request_hash = llm::request_hash(prompt, mcfg);
          if (!seen.insert(e.request_hash).second) continue;
          e.body = json{{"choices", json::array({{{"index", 0},
                                                  {"message", {{"role", "assistant"}, {"content", p.reference}}},
                                                  {"finish_reason", "stop"}}})}}
                       .dump();
          entries.push_back(std::move(e));
        }
      }
    }
    if (fs::path(*a.fixture_from_references).has_parent_path()) {
      fs::create_directories(fs::path(*a.fixture_from_references).parent_path());
    }
    llm::write_fixtures(*a.fixture_from_references, entries);
    out << json{{"fixture", *a.fixture_from_references}, {"entries", entries.size()}}.dump(2) << '\n';
    return kExitOk;
  }

  const auto transport = make_transport(a.replay, a.record);
  auto bert_provider = provider_for(s, a.common, resolve_dim(s, a.common));

  std::vector<eval::MetricReport> reports;
  json model_hashes = json::array();
  std::size_t missing = 0;
  for (auto kind : kinds) {
    const auto pcfg = pipeline_config(s, a.common, kind, templates ? &*templates : nullptr);
    for (const auto& model : models) {
      const auto mcfg = model_config(s, a.common, model);
      if (kind == kinds.front()) model_hashes.push_back({{"name", model}, {"config_hash", model_config_hash(mcfg)}});
      const llm::ChatClient client(mcfg, transport);
      const auto system = pipeline::make_system(pcfg, retriever_for(kind), client, parallelism);
      for (const auto& [dialect, group] : groups) {
        eval::ReportMeta meta{dialect, model, std::string(prompt::to_string(kind)),
                              kind == prompt::Kind::Zero ? 0 : pcfg.n};
        reports.push_back(eval::evaluate_run(group, system, *bert_provider, meta));
        missing += reports.back().n_missing;
        for (const auto& row : reports.back().sentences) {
          if (row.missing) err << meta.pipeline << '/' << model << '/' << row.id << ": " << row.error << '\n';
        }
      }
    }
  }

  const fs::path dir = a.out_dir;
  json all = json::array();
  for (const auto& r : reports) all.push_back(eval::to_json(r));
  write_file(dir / "report.json", all.dump(2) + "\n");
  for (auto kind : kinds) {
    std::vector<eval::MetricReport> subset;
    for (const auto& r : reports) {
      if (r.meta.pipeline == prompt::to_string(kind)) subset.push_back(r);
    }
    std::ostringstream csv;
    eval::write_csv(csv, subset);
    write_file(dir / ("report_" + std::string(prompt::to_string(kind)) + ".csv"), csv.str());
  }
  if (a.heatmap_csv) {
    std::ostringstream csv;
    eval::write_heatmap_csv(csv, reports);
    write_file(*a.heatmap_csv, csv.str());
  }

  const auto base_cfg = pipeline_config(s, a.common, prompt::Kind::P2, templates ? &*templates : nullptr);
  json pipelines = json::array();
  for (auto kind : kinds) pipelines.push_back(prompt::to_string(kind));
  json manifest = {
      {"tool_version", kToolVersion},
      {"timestamp", utc_timestamp()},
      {"command", "evaluate"},
      {"pipelines", pipelines},
      {"config", config_snapshot(base_cfg, tpl)},
      {"models", model_hashes},
      {"pairs_checksum", file_sha(a.pairs)},
      {"index_checksums", {{"p1", file_sha(a.p1_index)}, {"p2", file_sha(a.p2_index)}}},
      {"replay", a.replay.has_value()},
      {"fixture_checksum", file_sha(a.replay)},
      {"bertscore_embedder", bert_provider->model()},
  };
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  for (auto kind : kinds) {
    std::vector<eval::MetricReport> subset;
    for (const auto& r : reports) {
      if (r.meta.pipeline == prompt::to_string(kind)) subset.push_back(r);
    }
    out << "# " << prompt::to_string(kind) << '\n';
    eval::write_csv(out, subset);
  }
  if (missing) err << missing << " translation(s) missing; scored as failures\n";
  return kExitOk;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Retrieval-augmented Standard Bengali to dialect translation", "dialectrag"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "normalize and tag a raw corpus");
  ingest_cmd->add_option("--input", ingest.input, "JSON Lines or .csv file")->required();
  ingest_cmd->add_option("--format", ingest.format, "pairs or transcript")->capture_default_str();
  ingest_cmd->add_option("--output", ingest.output, "normalized corpus (JSON Lines)")->required();
  ingest_cmd->add_option("--stats", ingest.stats, "also write stats JSON here");
  ingest_cmd->add_flag("--lenient", ingest.lenient, "reject bad lines instead of failing");
  ingest_cmd->add_flag("--allow-unknown-districts", ingest.allow_unknown);

  IndexArgs index_args;
  auto* index_cmd = app.add_subcommand("index", "build the dense + BM25 index");
  index_cmd->add_option("--corpus", index_args.corpus, "normalized corpus from ingest")->required();
  index_cmd->add_option("--output", index_args.output, "index file")->required();
  add_common(index_cmd, index_args.common, false);

  QueryArgs query;
  auto* query_cmd = app.add_subcommand("query", "inspect retrieval");
  query_cmd->add_option("--index", query.index)->required();
  query_cmd->add_option("--query", query.query)->required();
  query_cmd->add_option("--dialect", query.dialect)->required();
  query_cmd->add_option("--pipeline", query.pipeline, "1 or 2")->capture_default_str();
  query_cmd->add_option("--k", query.k)->capture_default_str();
  query_cmd->add_option("--deep", query.deep, "auto, on or off")->capture_default_str();
  query_cmd->add_flag("--explain", query.explain, "print scores, weights and trigger decisions");
  add_common(query_cmd, query.common, false);

  TranslateArgs translate;
  auto* translate_cmd = app.add_subcommand("translate", "translate Standard Bengali into a dialect");
  translate_cmd->add_option("--index", translate.index);
  translate_cmd->add_option("--input", translate.input, "one sentence");
  translate_cmd->add_option("--inputs", translate.inputs, "JSON Lines with input and optional dialect");
  translate_cmd->add_option("--dialect", translate.dialect);
  translate_cmd->add_option("--pipeline", translate.pipeline, "zero, 1 or 2")->capture_default_str();
  translate_cmd->add_option("--model", translate.model, "also LLM_MODEL");
  translate_cmd->add_flag("--dry-run", translate.dry_run, "print the prompt only");
  translate_cmd->add_option("--replay", translate.replay, "answer from a fixture file");
  translate_cmd->add_option("--record", translate.record, "record exchanges to a fixture file");
  translate_cmd->add_option("--output", translate.output, "results (JSON Lines); default stdout");
  translate_cmd->add_option("--manifest", translate.manifest);
  add_common(translate_cmd, translate.common, true);

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "translate test pairs and score them");
  evaluate_cmd->add_option("--pairs", evaluate.pairs, "JSON Lines: input, reference, dialect")->required();
  evaluate_cmd->add_option("--pipeline", evaluate.pipelines, "zero,1,2")->delimiter(',')->capture_default_str();
  evaluate_cmd->add_option("--model", evaluate.models, "one or more, comma separated")->delimiter(',');
  evaluate_cmd->add_option("--p1-index", evaluate.p1_index, "transcript index for pipeline 1");
  evaluate_cmd->add_option("--p2-index", evaluate.p2_index, "pairs index for pipeline 2");
  evaluate_cmd->add_option("--replay", evaluate.replay);
  evaluate_cmd->add_option("--record", evaluate.record);
  evaluate_cmd->add_option("--out-dir", evaluate.out_dir)->capture_default_str();
  evaluate_cmd->add_option("--heatmap-csv", evaluate.heatmap_csv, "pipeline x dialect matrix");
  evaluate_cmd->add_option("--fixture-from-references", evaluate.fixture_from_references,
                           "write a replay fixture that answers every prompt with its reference, then exit");
  add_common(evaluate_cmd, evaluate.common, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(ingest, out, err);
    if (*index_cmd) return cmd_index(index_args, out);
    if (*query_cmd) return cmd_query(query, out);
    if (*translate_cmd) return cmd_translate(translate, out, err);
    if (*evaluate_cmd) return cmd_evaluate(evaluate, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace dialectrag::cli
