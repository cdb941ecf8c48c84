#include "dialectrag/pipeline.hpp"

#include <algorithm>

#include "dialectrag/corpus.hpp"

namespace dialectrag::pipeline {

prompt::FewShotPrompt build_prompt(std::string_view input, std::string_view dialect, const PipelineConfig& cfg,
                                   const retrieve::Retriever* retriever) {
  if (cfg.kind == prompt::Kind::Zero) {
    const std::string name = corpus::canonical_district(dialect);
    const auto& known = corpus::known_districts();
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw Error(ErrorCode::UnknownDialect, "unknown dialect '" + std::string(dialect) + "'");
    }
    return prompt::build_zero_shot(input, name, cfg.build);
  }
  if (retriever == nullptr) throw Error(ErrorCode::InvalidArgument, "retrieval pipelines need an index");
  if (cfg.n == 0) throw Error(ErrorCode::InvalidK, "few-shot budget must be >= 1");

  const std::string name = retriever->resolve_dialect(dialect);
  const auto result = cfg.kind == prompt::Kind::P1 ? retriever->retrieve_p1(input, name, cfg.n)
                                                   : retriever->retrieve_p2(input, name, cfg.n, cfg.deep);
  const auto examples = prompt::examples_from(result, retriever->index());
  return cfg.kind == prompt::Kind::P1 ? prompt::build_p1(input, name, examples, cfg.n, cfg.build)
                                      : prompt::build_p2(input, name, examples, cfg.n, cfg.build);
}

eval::System make_system(PipelineConfig cfg, const retrieve::Retriever* retriever, const llm::ChatClient& client,
                         std::size_t parallelism) {
  return [cfg, retriever, &client, parallelism](std::span<const eval::EvalPair> pairs) {
    std::vector<eval::Hypothesis> hyps(pairs.size());
    std::vector<prompt::FewShotPrompt> prompts;
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      try {
        prompts.push_back(build_prompt(pairs[i].input, pairs[i].dialect, cfg, retriever));
        slots.push_back(i);
      } catch (const Error& e) {
        hyps[i].error = e.code();
        hyps[i].error_message = e.what();
      }
    }
    const auto items = client.translate_batch(prompts, parallelism);
    for (std::size_t j = 0; j < items.size(); ++j) {
      auto& h = hyps[slots[j]];
      if (items[j].ok()) {
        h.text = items[j].result->output_text;
      } else {
        h.error = items[j].error;
        h.error_message = items[j].error_message;
      }
    }
    return hyps;
  };
}

}  // namespace dialectrag::pipeline
