#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "dialectrag/eval.hpp"
#include "dialectrag/llm.hpp"
#include "dialectrag/prompt.hpp"
#include "dialectrag/retrieve.hpp"

namespace dialectrag::pipeline {

struct PipelineConfig {
  prompt::Kind kind = prompt::Kind::P2;
  std::size_t n = 5;  // few-shot budget
  retrieve::DeepMode deep = retrieve::DeepMode::Auto;
  prompt::BuildOptions build;
};

/// Zero-shot needs no retriever; P1 and P2 retrieve n candidates first.
/// Throws UnknownDialect, EmptyInput, InvalidArgument (missing retriever).
prompt::FewShotPrompt build_prompt(std::string_view input, std::string_view dialect, const PipelineConfig& cfg,
                                   const retrieve::Retriever* retriever);

/// Builds every prompt, translates them with bounded parallelism and returns
/// hypotheses in input order. Per-item failures become missing hypotheses.
eval::System make_system(PipelineConfig cfg, const retrieve::Retriever* retriever, const llm::ChatClient& client,
                         std::size_t parallelism);

}  // namespace dialectrag::pipeline
