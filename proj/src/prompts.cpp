#include "provmind/prompts.hpp"

#include <cctype>
#include <cstdio>
#include <sstream>

#include "provmind/common.hpp"

namespace provmind {

using nlohmann::json;

std::string_view to_string(PromptMode m) {
  switch (m) {
    case PromptMode::plan: return "plan";
    case PromptMode::answer: return "answer";
    case PromptMode::zero_shot: return "zero_shot";
    case PromptMode::few_shot: return "few_shot";
    case PromptMode::rag: return "rag";
    case PromptMode::graphrag: return "graphrag";
  }
  return "answer";
}

char option_letter(std::size_t index) { return static_cast<char>('A' + index); }

namespace {

constexpr std::string_view kSystem =
    "You answer multiple-choice questions about materials synthesis procedures recorded as provenance graphs.";

std::vector<std::string> strings(const json& q, const char* key) {
  std::vector<std::string> out;
  if (!q.contains(key) || !q[key].is_array()) return out;
  for (const auto& v : q[key]) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  return out;
}

std::string listing(const std::vector<std::string>& xs) { return xs.empty() ? "(none)" : join(xs, ", "); }

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string step_context(const json& q) {
  std::ostringstream out;
  out << "Precursors: " << listing(strings(q, "precursors")) << "\n";
  out << "Route: " << join(strings(q, "route"), std::string(kRouteSeparator)) << "\n";
  const auto index = q.value("step_index", std::size_t{0});
  out << "Step " << index + 1 << ": " << q.value("activity", "");
  std::vector<std::string> inputs;
  for (const auto& in : q.value("step_inputs", json::array())) {
    std::string s = in.value("label", "");
    const std::string form = in.value("form", "");
    if (!form.empty()) s += " [" + form + "]";
    inputs.push_back(s);
  }
  out << " (inputs: " << listing(inputs) << ")\n";
  return out.str();
}

std::string question_text(const BenchItem& item) {
  const json& q = item.question;
  std::ostringstream out;
  switch (item.task) {
    case TaskKind::A1_route_retrieval:
      out << "Target products: " << listing(strings(q, "target_products")) << "\n";
      out << "Precursors: " << listing(strings(q, "precursors")) << "\n";
      out << "Which activity route produces the targets from these precursors?\n";
      break;
    case TaskKind::A2_missing_step:
      out << "Precursors: " << listing(strings(q, "precursors")) << "\n";
      out << "Target products: " << listing(strings(q, "target_products")) << "\n";
      out << "Route: " << join(strings(q, "route"), std::string(kRouteSeparator)) << "\n";
      out << "Which activity belongs at " << kMaskToken << "?\n";
      break;
    case TaskKind::A3_next_activity:
      out << "Precursors: " << listing(strings(q, "precursors")) << "\n";
      out << "Route so far: " << join(strings(q, "prefix"), std::string(kRouteSeparator)) << "\n";
      out << "Which activity comes next?\n";
      break;
    case TaskKind::B1_condition_prediction:
      out << step_context(q);
      out << "Which value of '" << q.value("condition_key", "") << "' was used in this step?\n";
      break;
    case TaskKind::B2_full_condition_set:
      out << step_context(q);
      out << "Which temperature, duration and atmosphere were used in this step?\n";
      break;
    case TaskKind::C1_tool_selection:
      out << step_context(q);
      out << "Which tool was used in this step?\n";
      break;
    case TaskKind::D_process_ordering: {
      out << "Precursors: " << listing(strings(q, "precursors")) << "\n";
      out << "Steps (unordered):\n";
      for (const auto& s : q.value("steps", json::array())) {
        std::vector<std::string> ins;
        std::vector<std::string> outs;
        for (const auto& e : s.value("inputs", json::array()))
          ins.push_back(e.value("ref", "") + " " + e.value("label", ""));
        for (const auto& e : s.value("outputs", json::array()))
          outs.push_back(e.value("ref", "") + " " + e.value("label", ""));
        out << "- " << s.value("label", "") << ": uses " << listing(ins) << "; makes " << listing(outs) << "\n";
      }
      out << "Which order of the steps is consistent with the material flow?\n";
      break;
    }
  }
  return out.str();
}

std::string records_block(const ProcessMemory& memory, const std::vector<RetrievedPrecedent>& precedents) {
  std::ostringstream out;
  std::size_t n = 0;
  for (const auto& p : precedents) {
    const auto* s = memory.find(p.graph_id);
    if (!s) continue;
    out << ++n << ". [" << p.graph_id << "] " << linearize(*s) << "\n";
  }
  return out.str();
}

}  // namespace

std::string render_question(const BenchItem& item) {
  std::string out = question_text(item);
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    out += "(";
    out += option_letter(i);
    out += ") " + item.options[i] + "\n";
  }
  return out;
}

std::string render_neighbourhood(const ProcessMemory& memory, const std::string& graph_id) {
  std::ostringstream out;
  out << "graph " << graph_id << "\n";
  for (const auto& e : memory.step_library) {
    if (e.graph_id != graph_id) continue;
    out << "  " << e.label << " <-used- " << listing(e.input_labels);
    if (!e.tools.empty()) out << " | tool " << listing(e.tools);
    out << " | -generated-> " << listing(e.output_labels) << "\n";
  }
  return out.str();
}

std::vector<ChatMessage> build_prompt(const BenchItem& item, PromptMode mode, const PromptContext& context) {
  const std::string question = render_question(item);
  const std::string letters = std::string(1, 'A') + "-" + std::string(1, option_letter(item.options.size() - 1));
  const std::string reply = "Reply with the letter of the correct option (" + letters + ") as 'Answer: X'.";
  std::vector<ChatMessage> messages{{"system", std::string(kSystem)}};
  std::ostringstream user;

  switch (mode) {
    case PromptMode::zero_shot:
      user << question << reply;
      break;
    case PromptMode::few_shot: {
      if (context.exemplars.size() != kFewShotExemplars) {
        throw Error(ErrorCode::missing_context, "few_shot needs " + std::to_string(kFewShotExemplars) + " exemplars, got " +
                                                    std::to_string(context.exemplars.size()));
      }
      for (std::size_t i = 0; i < context.exemplars.size(); ++i) {
        const BenchItem& ex = *context.exemplars[i];
        user << "Example " << i + 1 << ":\n" << render_question(ex);
        user << "Answer: " << option_letter(static_cast<std::size_t>(ex.gold_index)) << "\n\n";
      }
      user << "Question:\n" << question << reply;
      break;
    }
    case PromptMode::rag: {
      if (context.records.size() < kRagRecords) {
        throw Error(ErrorCode::missing_context, "rag needs " + std::to_string(kRagRecords) + " retrieved records");
      }
      user << "Related training processes:\n";
      for (std::size_t i = 0; i < kRagRecords; ++i) user << i + 1 << ". " << context.records[i] << "\n";
      user << "\nQuestion:\n" << question << reply;
      break;
    }
    case PromptMode::graphrag: {
      if (context.neighbourhoods.size() < kGraphRecords) {
        throw Error(ErrorCode::missing_context,
                    "graphrag needs " + std::to_string(kGraphRecords) + " neighbourhood summaries");
      }
      user << "Provenance neighbourhoods of related training processes:\n";
      for (std::size_t i = 0; i < kGraphRecords; ++i) user << context.neighbourhoods[i];
      user << "\nQuestion:\n" << question << reply;
      break;
    }
    case PromptMode::plan:
    case PromptMode::answer: {
      if (!context.memory) throw Error(ErrorCode::missing_context, "precedent memory not supplied");
      user << "Question:\n" << question << "\n";
      user << "Retrieved precedent processes:\n" << records_block(*context.memory, context.precedents) << "\n";
      if (mode == PromptMode::plan) {
        user << "Write a short reasoning plan for choosing among the options. Do not give the answer yet.";
        break;
      }
      if (!context.scores || context.scores->options.size() != item.options.size()) {
        throw Error(ErrorCode::missing_context, "answer mode needs one fused score per option");
      }
      user << "Compatibility evidence:\n";
      std::size_t best = 0;
      const auto& opts = context.scores->options;
      for (std::size_t i = 0; i < opts.size(); ++i) {
        user << "(" << option_letter(i) << ") s=" << fixed3(opts[i].fused) << " (symbolic " << fixed3(opts[i].sym)
             << ", neural " << fixed3(opts[i].neu) << ")\n";
        if (opts[i].fused > opts[best].fused) best = i;
      }
      user << "Highest compatibility option: (" << option_letter(best) << ")\n";
      if (!context.plan.empty()) user << "\nYour plan:\n" << context.plan << "\n";
      user << "\n" << reply;
      break;
    }
  }
  messages.push_back({"user", user.str()});
  return messages;
}

int parse_answer(std::string_view response, std::size_t option_count) {
  auto word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  for (std::size_t i = 0; i < response.size(); ++i) {
    const char c = response[i];
    if (c < 'A' || c > 'Z') continue;
    if (i > 0 && word(response[i - 1])) continue;
    if (i + 1 < response.size() && word(response[i + 1])) continue;
    const auto idx = static_cast<std::size_t>(c - 'A');
    if (idx < option_count) return static_cast<int>(idx);
  }
  return -1;
}

}  // namespace provmind
