#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "provmind/chat.hpp"
#include "provmind/memory.hpp"
#include "provmind/retrieval.hpp"
#include "provmind/scoring.hpp"
#include "provmind/taskgen.hpp"

namespace provmind {

enum class PromptMode { plan, answer, zero_shot, few_shot, rag, graphrag };

std::string_view to_string(PromptMode m);

inline constexpr std::string_view kPromptTemplateVersion = "prompts-v1";
inline constexpr std::size_t kFewShotExemplars = 3;
inline constexpr std::size_t kRagRecords = 3;
inline constexpr std::size_t kGraphRecords = 3;

/// Inputs a mode may need. Only the fields the chosen mode reads are checked.
struct PromptContext {
  const ProcessMemory* memory = nullptr;           // plan/answer/rag: renders precedent summaries
  std::vector<RetrievedPrecedent> precedents;      // plan/answer
  const OptionScores* scores = nullptr;            // answer: fused evidence
  std::string plan;                                // answer: embedded verbatim when non-empty
  std::vector<const BenchItem*> exemplars;         // few_shot
  std::vector<std::string> records;                // rag: linearized training processes
  std::vector<std::string> neighbourhoods;         // graphrag: rendered 1-hop blocks
};

char option_letter(std::size_t index);

/// Question text followed by "(A) ..." option lines.
std::string render_question(const BenchItem& item);

/// 1-hop view of a stored training process: one line per activity listing the
/// entities it used and generated, with tools marked.
std::string render_neighbourhood(const ProcessMemory& memory, const std::string& graph_id);

/// Throws Error{missing_context} when the mode's inputs are absent.
std::vector<ChatMessage> build_prompt(const BenchItem& item, PromptMode mode, const PromptContext& context);

/// Index of the first standalone option letter in range, or -1.
int parse_answer(std::string_view response, std::size_t option_count);

}  // namespace provmind
