#include "dialectrag/prompt.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dialectrag/corpus.hpp"
#include "dialectrag/error.hpp"
#include "dialectrag/unicode.hpp"
#include "templates_embedded.hpp"

namespace dialectrag::prompt {

namespace {

constexpr std::string_view kBlockOpen = "{#examples}";
constexpr std::string_view kBlockClose = "{/examples}";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Removes `marker` and the newline that ends its line.
void erase_marker_line(std::string& s, std::size_t pos, std::size_t len) {
  std::size_t end = pos + len;
  if (end < s.size() && s[end] == '\n') ++end;
  s.erase(pos, end - pos);
}

std::string render(const Template& tpl, std::string_view dialect, std::string_view input,
                   const std::vector<RenderedExample>& examples) {
  std::string text = tpl.body;
  const auto open = text.find(kBlockOpen);
  const auto close = text.find(kBlockClose);
  if (open != std::string::npos && close != std::string::npos && open < close) {
    if (examples.empty()) {
      erase_marker_line(text, open, close + kBlockClose.size() - open);
    } else {
      erase_marker_line(text, close, kBlockClose.size());
      erase_marker_line(text, open, kBlockOpen.size());
    }
  }

  std::string block;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (i) block += '\n';
    block += std::to_string(i + 1) + ". " + examples[i].text;
  }
  // Inputs are substituted last so placeholder-like text inside them stays literal.
  replace_all(text, "{examples}", "\x01EX\x01");
  replace_all(text, "{dialect}", "\x01DI\x01");
  replace_all(text, "{input}", "\x01IN\x01");
  replace_all(text, "\x01EX\x01", block);
  replace_all(text, "\x01DI\x01", dialect);
  replace_all(text, "\x01IN\x01", input);
  return text;
}

std::size_t code_points(const std::string& s) { return unicode::length(s); }

std::string rtrim(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.pop_back();
  return s;
}

struct Prepared {
  std::string input;
  std::string dialect;
};

Prepared prepare(std::string_view input, std::string_view dialect) {
  Prepared p{corpus::normalize_basic(input), corpus::canonical_district(dialect)};
  if (p.input.empty()) throw Error(ErrorCode::EmptyInput, "input sentence is empty");
  if (p.dialect.empty()) throw Error(ErrorCode::UnknownDialect, "dialect name is empty");
  return p;
}

FewShotPrompt assemble(Kind kind, const Prepared& p, std::vector<RenderedExample> rendered, std::size_t n,
                       const BuildOptions& options) {
  const Templates& templates = options.templates ? *options.templates : default_templates();
  const Template& tpl = templates.for_kind(kind);

  FewShotPrompt out;
  out.kind = kind;
  out.dialect = p.dialect;
  out.input_sentence = p.input;
  out.n_requested = n;
  out.template_version = tpl.version;
  out.text = render(tpl, p.dialect, p.input, rendered);
  // Over budget: drop the lowest-ranked examples first.
  while (!rendered.empty() && code_points(out.text) > options.char_budget) {
    rendered.pop_back();
    out.text = render(tpl, p.dialect, p.input, rendered);
  }
  out.examples = std::move(rendered);
  out.n_used = out.examples.size();
  return out;
}

}  // namespace

std::string_view to_string(Kind k) noexcept {
  switch (k) {
    case Kind::Zero: return "zero";
    case Kind::P1: return "P1";
    case Kind::P2: return "P2";
  }
  return "zero";
}

Kind parse_kind(std::string_view name) {
  if (name == "zero" || name == "0") return Kind::Zero;
  if (name == "1" || name == "P1" || name == "p1") return Kind::P1;
  if (name == "2" || name == "P2" || name == "p2") return Kind::P2;
  throw Error(ErrorCode::InvalidArgument, "pipeline must be zero, 1 or 2");
}

const Template& Templates::for_kind(Kind k) const noexcept {
  switch (k) {
    case Kind::Zero: return zero;
    case Kind::P1: return p1;
    case Kind::P2: return p2;
  }
  return zero;
}

Template parse_template(std::string_view contents) {
  const auto nl = contents.find('\n');
  const std::string_view first = contents.substr(0, nl);
  constexpr std::string_view kPrefix = "version:";
  if (!first.starts_with(kPrefix)) throw Error(ErrorCode::FormatError, "template must start with 'version:'");
  Template tpl;
  tpl.version = corpus::normalize_basic(first.substr(kPrefix.size()));
  tpl.body = nl == std::string_view::npos ? std::string() : rtrim(std::string(contents.substr(nl + 1)));
  if (tpl.version.empty()) throw Error(ErrorCode::FormatError, "template version is empty");
  if (tpl.body.find("{input}") == std::string::npos) {
    throw Error(ErrorCode::FormatError, "template '" + tpl.version + "' lacks an {input} placeholder");
  }
  return tpl;
}

const Templates& default_templates() {
  static const Templates templates{parse_template(embedded::kZero), parse_template(embedded::kP1),
                                   parse_template(embedded::kP2)};
  return templates;
}

Templates load_templates(const std::filesystem::path& dir) {
  auto read = [&](const char* name) {
    const auto path = dir / name;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_template(ss.str());
  };
  return {read("zero.txt"), read("p1.txt"), read("p2.txt")};
}

std::string strip_tags(std::string_view text) {
  std::string s(text);
  for (auto t : {corpus::Tag::Short, corpus::Tag::Question, corpus::Tag::Merged}) {
    replace_all(s, corpus::marker(t), " ");
  }
  return corpus::normalize_basic(s);
}

std::vector<Example> examples_from(const retrieve::RetrievalResult& result, const index::HybridIndex& index) {
  std::vector<Example> out;
  out.reserve(result.candidates.size());
  for (const auto& c : result.candidates) {
    const auto& rec = index.docs[c.doc];
    out.push_back({rec.id, rec.district, rec.standard_norm, rec.dialect_text(), c.blended});
  }
  return out;
}

FewShotPrompt build_zero_shot(std::string_view input, std::string_view dialect, const BuildOptions& options) {
  return assemble(Kind::Zero, prepare(input, dialect), {}, 0, options);
}

FewShotPrompt build_p1(std::string_view input, std::string_view dialect, std::span<const Example> examples,
                       std::size_t n, const BuildOptions& options) {
  const Prepared p = prepare(input, dialect);
  std::vector<RenderedExample> rendered;
  for (std::size_t i = 0; i < std::min(n, examples.size()); ++i) {
    rendered.push_back({examples[i].id, strip_tags(examples[i].dialect_text)});
  }
  return assemble(Kind::P1, p, std::move(rendered), n, options);
}

FewShotPrompt build_p2(std::string_view input, std::string_view dialect, std::span<const Example> examples,
                       std::size_t n, const BuildOptions& options) {
  const Prepared p = prepare(input, dialect);
  std::vector<const Example*> pool;
  for (const auto& e : examples) {
    if (e.district == p.dialect) pool.push_back(&e);
  }
  std::stable_sort(pool.begin(), pool.end(), [](const Example* a, const Example* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->id < b->id;
  });
  std::vector<RenderedExample> rendered;
  for (std::size_t i = 0; i < std::min(n, pool.size()); ++i) {
    rendered.push_back({pool[i]->id, "STANDARD: " + strip_tags(pool[i]->standard) +
                                         " → LOCAL: " + strip_tags(pool[i]->dialect_text)});
  }
  return assemble(Kind::P2, p, std::move(rendered), n, options);
}

}  // namespace dialectrag::prompt
