#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nmn/encoder.hpp"
#include "nmn/modules.hpp"
#include "nmn/program.hpp"
#include "nmn/tensor.hpp"
#include "nmn/text.hpp"

namespace nmn {

inline constexpr int kMaxDecodeSpanLen = 8;

struct TraceNode {
  std::string module;
  std::optional<QuestionSpan> span;
  ValueType type = ValueType::PAtt;
  std::vector<Tensor2> inputs;  // child output snapshots, in order
  Tensor2 output;
  std::vector<std::string> labels;  // one per output column
  double aux = 0.0;                 // loss registered by this node
};

struct ExecutionTrace {
  std::string program_text;
  std::vector<TraceNode> nodes;  // post-order
  double total_aux = 0.0;
  std::optional<Answer> answer;
};

// Root value of an executed program, still attached to the tape.
struct ModuleValue {
  ValueType type = ValueType::PAtt;
  Tape::Var var;
  std::vector<int> deltas;  // YearDiffDist support
};

struct ExecutionResult {
  ModuleValue root;
  Tape::Var total_aux;  // 1x1 node
  ExecutionTrace trace;
  std::vector<int> fallback_rows;  // masked-row fallbacks observed anywhere
};

// Evaluates a typechecked program bottom-up over pre-encoded representations.
// The caller owns the tape, so losses can be composed on top of the result.
ExecutionResult execute_encoded(Tape& tape, const Program& program, Tape::Var question_rep,
                                Tape::Var paragraph_rep, int n_q, const ParagraphIndex& pidx,
                                const ParamStore& params, const VariantConfig& cfg);

// Convenience wrapper: tokenize, index, encode, execute, decode.
struct RunOutput {
  Answer answer;
  ExecutionTrace trace;
};
RunOutput execute(const std::string& program_text, const std::string& question,
                  const std::string& paragraph, const Model& model, const VariantConfig& cfg);

Answer decode_answer(ValueType type, const Tensor2& dist, const std::vector<int>& deltas,
                     const ParagraphIndex& pidx, int max_span_len = kMaxDecodeSpanLen);

enum class TraceFormat { Json, Csv };
std::string dump_trace(const ExecutionTrace& trace, TraceFormat format);

}  // namespace nmn
