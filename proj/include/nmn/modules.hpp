#pragma once

#include <string>
#include <vector>

#include "nmn/tensor.hpp"
#include "nmn/text.hpp"

namespace nmn {

enum class AuxMode { Window, Sentence };
enum class RelationKind { Number, Date };

// One ablation row: question-aware execution (qai), the same-sentence
// constraint (nepc), and which positional auxiliary loss is in force.
struct VariantConfig {
  bool qai = false;
  bool nepc = false;
  MaskMode mask_mode = MaskMode::NegInf;
  AuxMode aux_mode = AuxMode::Window;
  double lambda = 0.5;  // paragraph/question mixing weight, in [0,1]
  int window = 10;      // aux window half-width, >= 1

  void validate() const;

  static VariantConfig original();
  static VariantConfig with_qai();
  static VariantConfig with_qai_nepc();
  static VariantConfig full();
  // one of: original, qai, qai+nepc, full
  static VariantConfig by_name(const std::string& name);
};

// Binary m x N matrix; entry (i, j) is 1 iff paragraph token i and the j-th
// number token (or date token) share a sentence.
struct RelationMatrix {
  Tensor2 entries;
};

RelationMatrix build_relation_matrix(const ParagraphIndex& pidx, RelationKind kind);

// Auxiliary loss terms registered during one program execution.
struct AuxAccumulator {
  std::vector<std::pair<std::string, Tape::Var>> terms;
  Tape::Var total(Tape& tape) const;  // 1x1; zero node when empty
  double total_value(const Tape& tape) const;
};

// Shared inputs for one program execution over one (question, paragraph).
struct ModuleContext {
  Tape& tape;
  const ParagraphIndex& pidx;
  const ParamStore& params;
  VariantConfig cfg;
  Tape::Var P;  // m x d paragraph representations
  Tape::Var Q;  // n_q x d question representations
  Tensor2 whole_question;  // uniform fallback distribution over question tokens
  AuxAccumulator* aux = nullptr;
  std::vector<int>* fallback_rows = nullptr;  // masked-row fallback audit trail
};

// Positional auxiliary loss over an attention matrix whose columns map to
// paragraph token positions via col_token. Window mode keeps mass inside
// [i +- window]; Sentence mode keeps it inside token i's sentence.
Tape::Var aux_loss(Tape& tape, Tape::Var attention, const std::vector<int>& col_token,
                   const ParagraphIndex& pidx, AuxMode mode, int window);

// q_arg is a distribution over question tokens (the span argument).
Tape::Var module_find(ModuleContext& ctx, Tape::Var q_arg);
Tape::Var module_filter(ModuleContext& ctx, Tape::Var q_arg, Tape::Var p_att);
Tape::Var module_relocate(ModuleContext& ctx, Tape::Var q_arg, Tape::Var p_att);

// Distribution over the paragraph's numbers (1 x N_t).
Tape::Var module_find_num(ModuleContext& ctx, Tape::Var p_att, Tape::Var q_arg);
// Distribution over date groups (1 x G).
Tape::Var module_find_date(ModuleContext& ctx, Tape::Var p_att, Tape::Var q_arg);

enum class ExtremeMode { Max, Min };
Tape::Var module_find_extreme_num(ModuleContext& ctx, Tape::Var p_att, ExtremeMode mode,
                                  double tau = 1.0);

enum class CompareMode { Lt, Gt };
Tape::Var module_compare_num(ModuleContext& ctx, Tape::Var p1, Tape::Var p2, CompareMode mode);

inline constexpr int kCountSupport = 10;  // counts 0..9
inline constexpr double kCountInputScale = 25.0;
Tape::Var module_count(ModuleContext& ctx, Tape::Var p_att);
// Gaussian readout over 0..9 centered at a 1x1 expected-count node.
Tape::Var count_distribution(Tape& tape, Tape::Var expected, Tape::Var sigma);

struct YearDiffResult {
  Tape::Var dist;               // 1 x K over distinct absolute year gaps
  std::vector<int> deltas;      // ascending support values
};
YearDiffResult module_year_diff(ModuleContext& ctx, Tape::Var date1, Tape::Var date2);

}  // namespace nmn
