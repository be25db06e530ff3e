#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nmn/errors.hpp"

namespace nmn {

enum class ValueType { QAtt, PAtt, NumDist, DateDist, CountDist, YearDiffDist, Span };

std::string value_type_name(ValueType t);

struct QuestionSpan {
  int begin = 0;
  int end = 0;  // half-open [begin, end)
  bool operator==(const QuestionSpan& o) const { return begin == o.begin && end == o.end; }
};

struct ProgramNode {
  std::string module;
  std::optional<QuestionSpan> span;
  std::vector<std::unique_ptr<ProgramNode>> children;
  ValueType type = ValueType::PAtt;  // filled in by typecheck
};

struct Program {
  std::unique_ptr<ProgramNode> root;
  int node_count() const;
  int depth() const;
};

struct ModuleSignature {
  std::string name;
  std::vector<ValueType> inputs;
  ValueType output;
  bool accepts_span = false;  // optional leading Q[a:b] argument
};

// Closed signature table shared by the typechecker and the interpreter.
const std::vector<ModuleSignature>& signature_table();
const ModuleSignature* find_signature(const std::string& name);

// Programs deeper than this are rejected (decode-step budget).
inline constexpr int kMaxProgramDepth = 14;

Program parse_program(const std::string& text);
// Assigns node types bottom-up and validates spans against the question
// length; throws parse_error on any violation.
void typecheck(Program& program, int question_tokens);
std::string print_program(const Program& program);

bool structurally_equal(const Program& a, const Program& b);

}  // namespace nmn
