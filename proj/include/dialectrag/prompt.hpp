#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dialectrag/index.hpp"
#include "dialectrag/retrieve.hpp"

namespace dialectrag::prompt {

enum class Kind { Zero, P1, P2 };

std::string_view to_string(Kind k) noexcept;
Kind parse_kind(std::string_view name);

/// A prompt template. Placeholders: {dialect}, {input}, {examples}; the
/// optional block {#examples}...{/examples} is dropped when there are no examples.
/// The first line of a template file is "version: <string>".
struct Template {
  std::string version;
  std::string body;
};

struct Templates {
  Template zero;
  Template p1;
  Template p2;

  const Template& for_kind(Kind k) const noexcept;
};

/// Built-in templates; identical to the files shipped under templates/.
const Templates& default_templates();

Template parse_template(std::string_view file_contents);

/// Reads {dir}/zero.txt, p1.txt and p2.txt.
Templates load_templates(const std::filesystem::path& dir);

inline constexpr std::size_t kDefaultCharBudget = 8000;

/// One retrieved example, as the prompt needs it.
struct Example {
  std::string id;
  std::string district;
  std::string standard;  // empty for transcript examples
  std::string dialect_text;
  double score = 0.0;
};

/// Ranked candidates -> examples, in rank order.
std::vector<Example> examples_from(const retrieve::RetrievalResult& result, const index::HybridIndex& index);

struct RenderedExample {
  std::string id;
  std::string text;
};

struct FewShotPrompt {
  std::string text;
  std::vector<RenderedExample> examples;
  std::size_t n_requested = 0;
  std::size_t n_used = 0;
  Kind kind = Kind::Zero;
  std::string dialect;
  std::string input_sentence;
  std::string template_version;
};

struct BuildOptions {
  std::size_t char_budget = kDefaultCharBudget;  // in code points
  const Templates* templates = nullptr;          // null: default_templates()
};

FewShotPrompt build_zero_shot(std::string_view input, std::string_view dialect, const BuildOptions& options = {});

/// First min(n, |examples|) examples as dialect-text context blocks.
FewShotPrompt build_p1(std::string_view input, std::string_view dialect, std::span<const Example> examples,
                       std::size_t n, const BuildOptions& options = {});

/// Examples of `dialect` only, sorted by score, rendered "STANDARD: ... → LOCAL: ...".
FewShotPrompt build_p2(std::string_view input, std::string_view dialect, std::span<const Example> examples,
                       std::size_t n, const BuildOptions& options = {});

/// Strips [[SHORT]] / [[QUESTION]] / [[MERGED]] markers and re-collapses whitespace.
std::string strip_tags(std::string_view text);

}  // namespace dialectrag::prompt
