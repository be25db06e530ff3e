#include "nmn/modules.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "nmn/log.hpp"

namespace nmn {

void VariantConfig::validate() const {
  if (lambda < 0.0 || lambda > 1.0)
    throw contract_error("VariantConfig: lambda must lie in [0,1]");
  if (window < 1) throw contract_error("VariantConfig: window must be >= 1");
}

VariantConfig VariantConfig::original() { return VariantConfig{}; }

VariantConfig VariantConfig::with_qai() {
  VariantConfig c;
  c.qai = true;
  return c;
}

VariantConfig VariantConfig::with_qai_nepc() {
  VariantConfig c;
  c.qai = true;
  c.nepc = true;
  return c;
}

VariantConfig VariantConfig::full() {
  VariantConfig c;
  c.qai = true;
  c.nepc = true;
  c.aux_mode = AuxMode::Sentence;
  return c;
}

VariantConfig VariantConfig::by_name(const std::string& name) {
  if (name == "original") return original();
  if (name == "qai") return with_qai();
  if (name == "qai+nepc") return with_qai_nepc();
  if (name == "full") return full();
  throw contract_error("unknown variant '" + name +
                       "' (expected original, qai, qai+nepc or full)");
}

RelationMatrix build_relation_matrix(const ParagraphIndex& pidx, RelationKind kind) {
  const std::vector<int> cols = kind == RelationKind::Number
                                    ? [&] {
                                        std::vector<int> v;
                                        for (const auto& nm : pidx.numbers)
                                          v.push_back(nm.token_index);
                                        return v;
                                      }()
                                    : pidx.date_token_indices();
  RelationMatrix rel;
  rel.entries = Tensor2(pidx.token_count(), static_cast<int>(cols.size()), 0.0);
  for (int i = 0; i < pidx.token_count(); ++i) {
    const int si = pidx.sentence_of(i);
    for (int j = 0; j < static_cast<int>(cols.size()); ++j)
      if (pidx.sentence_of(cols[j]) == si) rel.entries.at(i, j) = 1.0;
  }
  return rel;
}

Tape::Var AuxAccumulator::total(Tape& tape) const {
  if (terms.empty()) return tape.input(Tensor2(1, 1, 0.0), "aux-zero");
  Tape::Var acc = terms[0].second;
  for (size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i].second);
  return acc;
}

double AuxAccumulator::total_value(const Tape& tape) const {
  double s = 0.0;
  for (const auto& [_, v] : terms) s += tape.value(v).at(0, 0);
  return s;
}

Tape::Var aux_loss(Tape& tape, Tape::Var attention, const std::vector<int>& col_token,
                   const ParagraphIndex& pidx, AuxMode mode, int window) {
  const Tensor2& av = tape.value(attention);
  if (av.cols != static_cast<int>(col_token.size()))
    throw shape_error("aux_loss: attention has " + std::to_string(av.cols) +
                      " columns but " + std::to_string(col_token.size()) +
                      " column tokens were supplied");
  Tensor2 indicator(av.rows, av.cols, 0.0);
  for (int i = 0; i < av.rows; ++i) {
    for (int j = 0; j < av.cols; ++j) {
      const int t = col_token[j];
      const bool keep = mode == AuxMode::Window
                            ? std::abs(t - i) <= window
                            : pidx.sentence_of(t) == pidx.sentence_of(i);
      if (keep) indicator.at(i, j) = 1.0;
    }
  }
  Tape::Var kept = tape.row_sums(tape.mul(attention, tape.input(std::move(indicator), "aux")));
  return tape.scale(tape.sum_all(tape.log_clamped(kept, 1e-12)), -1.0);
}

namespace {

// Attention-weighted summary of the question: q_arg (1 x n_q) times Q.
Tape::Var span_summary(ModuleContext& ctx, Tape::Var q_arg) {
  return ctx.tape.matmul(q_arg, ctx.Q);
}

struct ScoredAttention {
  Tape::Var attention;  // rows softmaxed
  std::vector<int> col_token;
};

// Bilinear scoring of paragraph rows against the representation rows of the
// tokens listed in `col_token`, with the variant's same-sentence masking.
ScoredAttention scored_attention(ModuleContext& ctx, const std::string& weight_name,
                                 const std::vector<int>& col_token, RelationKind kind) {
  Tape& t = ctx.tape;
  Tape::Var targets = t.gather_rows(ctx.P, col_token);
  Tape::Var scores = t.bilinear_scores(ctx.P, t.param(weight_name, ctx.params), targets);
  if (!ctx.cfg.nepc) return {t.row_softmax(scores), col_token};
  RelationMatrix rel = build_relation_matrix(ctx.pidx, kind);
  auto res = t.row_softmax(scores, &rel.entries, ctx.cfg.mask_mode,
                           MaskedRowPolicy::UnmaskedFallback);
  if (!res.fallback_rows.empty()) {
    logging::debug("scored_attention(" + weight_name + "): " +
                   std::to_string(res.fallback_rows.size()) +
                   " fully masked row(s) fell back to the unmasked softmax");
    if (ctx.fallback_rows != nullptr)
      ctx.fallback_rows->insert(ctx.fallback_rows->end(), res.fallback_rows.begin(),
                                res.fallback_rows.end());
  }
  return {res.out, col_token};
}

// Question-side alignment to the same targets: rows are question tokens.
// The same-sentence relation is undefined for question rows, so no mask.
Tape::Var question_side_attention(ModuleContext& ctx, const std::string& weight_name,
                                  const std::vector<int>& col_token) {
  Tape& t = ctx.tape;
  Tape::Var targets = t.gather_rows(ctx.P, col_token);
  Tape::Var scores = t.bilinear_scores(ctx.Q, t.param(weight_name, ctx.params), targets);
  return t.row_softmax(scores);
}

Tape::Var q_arg_or_uniform(ModuleContext& ctx, Tape::Var q_arg) {
  if (q_arg.valid()) return q_arg;
  return ctx.tape.input(ctx.whole_question, "whole-question");
}

// Shared core of find-num / find-date: paragraph-side marginal, optional
// question-aware mixing, optional aux registration. Output is a distribution
// over `col_token` columns.
Tape::Var token_target_marginal(ModuleContext& ctx, const std::string& weight_name,
                                const std::vector<int>& col_token, RelationKind kind,
                                Tape::Var p_att, Tape::Var q_arg, bool register_aux,
                                const char* aux_tag) {
  Tape& t = ctx.tape;
  ScoredAttention sa = scored_attention(ctx, weight_name, col_token, kind);
  Tape::Var marginal = t.marginalize(p_att, sa.attention);
  if (register_aux && ctx.aux != nullptr) {
    Tape::Var loss =
        aux_loss(t, sa.attention, sa.col_token, ctx.pidx, ctx.cfg.aux_mode, ctx.cfg.window);
    ctx.aux->terms.emplace_back(aux_tag, loss);
  }
  if (!ctx.cfg.qai) return marginal;
  Tape::Var q_attention = question_side_attention(ctx, weight_name, col_token);
  Tape::Var q_marginal = t.marginalize(q_arg_or_uniform(ctx, q_arg), q_attention);
  return t.add(t.scale(marginal, ctx.cfg.lambda), t.scale(q_marginal, 1.0 - ctx.cfg.lambda));
}

std::vector<int> number_token_indices(const ParagraphIndex& pidx) {
  std::vector<int> v;
  v.reserve(pidx.numbers.size());
  for (const auto& nm : pidx.numbers) v.push_back(nm.token_index);
  return v;
}

Tape::Var number_marginal(ModuleContext& ctx, Tape::Var p_att, Tape::Var q_arg,
                          bool register_aux) {
  return token_target_marginal(ctx, "mod.num.w", number_token_indices(ctx.pidx),
                               RelationKind::Number, p_att, q_arg, register_aux, "find-num");
}

}  // namespace

Tape::Var module_find(ModuleContext& ctx, Tape::Var q_arg) {
  Tape& t = ctx.tape;
  Tape::Var scores =
      t.bilinear_scores(ctx.Q, t.param("mod.find.w", ctx.params), ctx.P);  // n_q x m
  Tape::Var attention = t.row_softmax(scores);
  return t.marginalize(q_arg_or_uniform(ctx, q_arg), attention);
}

Tape::Var module_filter(ModuleContext& ctx, Tape::Var q_arg, Tape::Var p_att) {
  Tape& t = ctx.tape;
  Tape::Var summary = span_summary(ctx, q_arg_or_uniform(ctx, q_arg));  // 1 x d
  Tape::Var gate_scores =
      t.bilinear_scores(summary, t.param("mod.filter.w", ctx.params), ctx.P);  // 1 x m
  Tape::Var gate = t.sigmoid(gate_scores);
  Tape::Var gated = t.mul(gate, p_att);
  if (t.value(gated).sum() <= 1e-300) {
    logging::info("filter: gated mass vanished, falling back to the input attention");
    return p_att;
  }
  return t.normalize_rows(gated);
}

Tape::Var module_relocate(ModuleContext& ctx, Tape::Var q_arg, Tape::Var p_att) {
  Tape& t = ctx.tape;
  const int m = ctx.pidx.token_count();
  Tape::Var summary = span_summary(ctx, q_arg_or_uniform(ctx, q_arg));          // 1 x d
  Tape::Var conditioned = t.add(ctx.P, t.tile_rows(summary, m));
  Tape::Var scores =
      t.bilinear_scores(conditioned, t.param("mod.relocate.w", ctx.params), ctx.P);  // m x m
  Tape::Var attention = t.row_softmax(scores);
  if (ctx.aux != nullptr) {
    std::vector<int> identity(m);
    for (int i = 0; i < m; ++i) identity[i] = i;
    Tape::Var loss =
        aux_loss(t, attention, identity, ctx.pidx, ctx.cfg.aux_mode, ctx.cfg.window);
    ctx.aux->terms.emplace_back("relocate", loss);
  }
  return t.marginalize(p_att, attention);
}

Tape::Var module_find_num(ModuleContext& ctx, Tape::Var p_att, Tape::Var q_arg) {
  if (ctx.pidx.number_count() == 0)
    throw exec_error("find-num: paragraph contains no numbers");
  return number_marginal(ctx, p_att, q_arg, /*register_aux=*/true);
}

Tape::Var module_find_date(ModuleContext& ctx, Tape::Var p_att, Tape::Var q_arg) {
  Tape& t = ctx.tape;
  if (ctx.pidx.date_groups.empty())
    throw exec_error("find-date: paragraph contains no dates");
  const std::vector<int> date_tokens = ctx.pidx.date_token_indices();
  Tape::Var token_marginal =
      token_target_marginal(ctx, "mod.date.w", date_tokens, RelationKind::Date, p_att, q_arg,
                            /*register_aux=*/true, "find-date");
  // collapse member tokens onto their groups, then renormalize
  const std::vector<int> groups = ctx.pidx.date_token_groups();
  const int g_count = static_cast<int>(ctx.pidx.date_groups.size());
  Tensor2 grouping(static_cast<int>(date_tokens.size()), g_count, 0.0);
  for (int j = 0; j < static_cast<int>(groups.size()); ++j) grouping.at(j, groups[j]) = 1.0;
  Tape::Var group_mass = t.matmul(token_marginal, t.input(std::move(grouping), "date-groups"));
  return t.normalize_rows(group_mass);
}

Tape::Var module_find_extreme_num(ModuleContext& ctx, Tape::Var p_att, ExtremeMode mode,
                                  double tau) {
  Tape& t = ctx.tape;
  if (ctx.pidx.number_count() == 0)
    throw exec_error("find-max/min-num: paragraph contains no numbers");
  if (!(tau > 0.0)) throw contract_error("find-max/min-num: tau must be positive");
  Tape::Var numbers = number_marginal(ctx, p_att, Tape::Var{}, /*register_aux=*/false);
  const int n = ctx.pidx.number_count();
  // w_j ∝ T_j * exp(±v_j / tau), computed in log space so wide value ranges
  // cannot overflow or underflow; zero-mass entries stay excluded
  Tensor2 value_term(1, n);
  Tensor2 support(1, n);
  for (int j = 0; j < n; ++j) {
    const double v = ctx.pidx.numbers[j].value;
    value_term.at(0, j) = (mode == ExtremeMode::Max ? v : -v) / tau;
    support.at(0, j) = t.value(numbers).at(0, j) > 0.0 ? 1.0 : 0.0;
  }
  Tape::Var scores =
      t.add(t.log_clamped(numbers, 1e-300), t.input(std::move(value_term), "extreme-values"));
  Tape::Var reweighted =
      t.row_softmax(scores, &support, MaskMode::NegInf, MaskedRowPolicy::Error).out;
  // project number mass back onto the number tokens
  Tensor2 projection(n, ctx.pidx.token_count(), 0.0);
  for (int j = 0; j < n; ++j) projection.at(j, ctx.pidx.numbers[j].token_index) = 1.0;
  return t.marginalize(reweighted, t.input(std::move(projection), "number-projection"));
}

Tape::Var module_compare_num(ModuleContext& ctx, Tape::Var p1, Tape::Var p2,
                             CompareMode mode) {
  Tape& t = ctx.tape;
  if (ctx.pidx.number_count() == 0)
    throw exec_error("compare-num: paragraph contains no numbers");
  Tape::Var t1 = number_marginal(ctx, p1, Tape::Var{}, /*register_aux=*/false);
  Tape::Var t2 = number_marginal(ctx, p2, Tape::Var{}, /*register_aux=*/false);
  const int n = ctx.pidx.number_count();
  Tensor2 wins(n, n, 0.0);  // wins[j1][j2] = P(side 1 "wins" | values j1, j2)
  for (int j1 = 0; j1 < n; ++j1)
    for (int j2 = 0; j2 < n; ++j2) {
      const double v1 = ctx.pidx.numbers[j1].value;
      const double v2 = ctx.pidx.numbers[j2].value;
      double w;
      if (v1 == v2) w = 0.5;
      else if (mode == CompareMode::Lt) w = v1 < v2 ? 1.0 : 0.0;
      else w = v1 > v2 ? 1.0 : 0.0;
      wins.at(j1, j2) = w;
    }
  Tape::Var p = t.matmul(t.matmul(t1, t.input(std::move(wins), "compare-table")),
                         t.transpose(t2));  // 1x1
  Tape::Var one = t.input(Tensor2(1, 1, 1.0), "one");
  return t.add(t.scale_by(p1, p), t.scale_by(p2, t.sub(one, p)));
}

Tape::Var count_distribution(Tape& tape, Tape::Var expected, Tape::Var sigma) {
  Tensor2 support(1, kCountSupport);
  for (int k = 0; k < kCountSupport; ++k) support.at(0, k) = k;
  Tape::Var ks = tape.input(std::move(support), "count-support");
  Tape::Var diff = tape.sub(ks, tape.tile_scalar(expected, 1, kCountSupport));
  Tape::Var sq = tape.mul(diff, diff);
  Tape::Var two_sigma_sq = tape.add(tape.scale(tape.mul(sigma, sigma), 2.0),
                                    tape.input(Tensor2(1, 1, 1e-6), "sigma-floor"));
  return tape.normalize_rows(tape.exp(tape.scale(tape.div_by(sq, two_sigma_sq), -1.0)));
}

Tape::Var module_count(ModuleContext& ctx, Tape::Var p_att) {
  Tape& t = ctx.tape;
  const int m = ctx.pidx.token_count();
  Tape::Var a = t.param("mod.count.a", ctx.params);
  Tape::Var b = t.param("mod.count.b", ctx.params);
  Tape::Var gate_in = t.add(t.scale_by(t.scale(p_att, kCountInputScale), a),
                            t.tile_scalar(b, 1, m));
  Tape::Var expected = t.sum_all(t.sigmoid(gate_in));
  return count_distribution(t, expected, t.param("mod.count.sigma", ctx.params));
}

YearDiffResult module_year_diff(ModuleContext& ctx, Tape::Var date1, Tape::Var date2) {
  Tape& t = ctx.tape;
  const auto& groups = ctx.pidx.date_groups;
  const int g = static_cast<int>(groups.size());
  const Tensor2& d1 = t.value(date1);
  const Tensor2& d2 = t.value(date2);
  if (d1.cols != g || d2.cols != g)
    throw shape_error("year-diff: date distributions do not match the paragraph's " +
                      std::to_string(g) + " date groups");
  for (int i = 0; i < g; ++i) {
    if (groups[i].year) continue;
    const double mass = std::max(d1.at(0, i), d2.at(0, i));
    if (mass > 1e-6)
      throw contract_error("year-diff: date group " + std::to_string(i) +
                           " carries mass " + std::to_string(mass) + " but has no year");
  }
  std::set<int> delta_set;
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j)
      if (groups[i].year && groups[j].year)
        delta_set.insert(std::abs(*groups[i].year - *groups[j].year));
  if (delta_set.empty()) throw exec_error("year-diff: no dated group pairs available");
  std::vector<int> deltas(delta_set.begin(), delta_set.end());
  std::map<int, int> slot_of;
  for (int k = 0; k < static_cast<int>(deltas.size()); ++k) slot_of[deltas[k]] = k;
  std::vector<int> slot_map(static_cast<size_t>(g) * g, -1);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j)
      if (groups[i].year && groups[j].year)
        slot_map[static_cast<size_t>(i) * g + j] =
            slot_of[std::abs(*groups[i].year - *groups[j].year)];
  Tape::Var mass =
      t.pair_collect(date1, date2, std::move(slot_map), static_cast<int>(deltas.size()));
  return YearDiffResult{t.normalize_rows(mass), std::move(deltas)};
}

}  // namespace nmn
