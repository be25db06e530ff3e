#pragma once

// Relation-map instances for the soft/hard agreement suite. Each instance
// fixes discrete relations (find match sets, token->number, token->date,
// token->token maps), encodes them as saturated bilinear weights over a
// token-basis representation, and carries an independent set-semantics
// executor. With saturation at +-1000 the soft attentions underflow to exact
// one-hot rows, so the differentiable interpreter must reproduce the set
// executor's decoded answer exactly.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nmn/interpreter.hpp"
#include "nmn/program.hpp"
#include "nmn/rng.hpp"
#include "nmn/tensor.hpp"
#include "nmn/text.hpp"

namespace nmntest {

using namespace nmn;

inline constexpr double kSat = 1000.0;

struct HardInstance {
  ParagraphIndex pidx;
  ParamStore params;
  Tensor2 P, Q;
  int n_q = 0;
  std::string program_text;

  std::vector<std::vector<int>> find_sets;  // per question slot
  std::vector<int> num_map;                 // token -> number id
  std::vector<int> date_map;                // token -> date group id
  std::vector<int> reloc_map;               // token -> token
};

inline HardInstance make_hard_instance(Rng& rng) {
  HardInstance inst;

  // paragraph: 2-4 sentences of plain words, numbers, and year-only dates
  const int sentences = rng.range(2, 4);
  std::vector<std::string> words;
  int number_budget = rng.range(2, 4);
  int year_budget = rng.range(2, 3);
  std::vector<int> values, years;
  {  // distinct, gapped pools keep extremes and comparisons unambiguous
    int v = 10 + rng.bounded(5);
    for (int i = 0; i < number_budget; ++i) {
      values.push_back(v);
      v += 3 + rng.bounded(4);
    }
    int y = 1950 + rng.bounded(8);
    for (int i = 0; i < year_budget; ++i) {
      years.push_back(y);
      y += 4 + rng.bounded(7);
    }
  }
  int vi = 0, yi = 0;
  std::string text;
  for (int s = 0; s < sentences; ++s) {
    int body = rng.range(2, 4);
    for (int b = 0; b < body; ++b) {
      words.push_back("w" + std::to_string(words.size()));
      text += words.back() + " ";
    }
    if (vi < number_budget && (rng.chance(0.7) || s == 0)) {
      text += std::to_string(values[static_cast<size_t>(vi++)]) + " ";
    }
    if (yi < year_budget && (rng.chance(0.6) || s == sentences - 1)) {
      text += std::to_string(years[static_cast<size_t>(yi++)]) + " ";
    }
    text += ". ";
  }
  inst.pidx = build_paragraph_index(text);
  const int m = inst.pidx.token_count();
  const int n_num = inst.pidx.number_count();
  const int n_grp = static_cast<int>(inst.pidx.date_groups.size());

  // same-sentence-consistent relation maps
  inst.num_map.resize(static_cast<size_t>(m));
  inst.date_map.resize(static_cast<size_t>(m));
  inst.reloc_map.resize(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    std::vector<int> same_nums, same_grps;
    for (int j = 0; j < n_num; ++j)
      if (inst.pidx.sentence_of(inst.pidx.numbers[j].token_index) == inst.pidx.sentence_of(i))
        same_nums.push_back(j);
    for (int g = 0; g < n_grp; ++g)
      if (inst.pidx.sentence_of(inst.pidx.date_groups[g].token_indices.front()) ==
          inst.pidx.sentence_of(i))
        same_grps.push_back(g);
    inst.num_map[static_cast<size_t>(i)] =
        !same_nums.empty() ? same_nums[static_cast<size_t>(rng.bounded(
                                 static_cast<int>(same_nums.size())))]
        : n_num > 0 ? rng.bounded(n_num)
                    : -1;
    inst.date_map[static_cast<size_t>(i)] =
        !same_grps.empty() ? same_grps[static_cast<size_t>(rng.bounded(
                                 static_cast<int>(same_grps.size())))]
        : n_grp > 0 ? rng.bounded(n_grp)
                    : -1;
    inst.reloc_map[static_cast<size_t>(i)] = rng.bounded(m);
  }
  // number tokens relate to themselves, so chained lookups stay aligned
  for (int j = 0; j < n_num; ++j)
    inst.num_map[static_cast<size_t>(inst.pidx.numbers[j].token_index)] = j;

  // question slots: a handful of match sets plus one zero row for relocate
  const int find_slots = 4;
  inst.n_q = find_slots + 1;
  inst.find_sets.resize(static_cast<size_t>(find_slots));
  for (auto& set : inst.find_sets) {
    int size = rng.chance(0.5) ? 1 : rng.range(2, 3);
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < size) chosen.insert(rng.bounded(m));
    set.assign(chosen.begin(), chosen.end());
  }

  // token-basis representations and saturated relation weights
  inst.P = Tensor2::identity(m);
  inst.Q = Tensor2(inst.n_q, m, 0.0);
  for (int k = 0; k < find_slots; ++k)
    for (int i : inst.find_sets[static_cast<size_t>(k)]) inst.Q.at(k, i) = 1.0;

  Tensor2 w_find(m, m, 0.0);
  for (int i = 0; i < m; ++i) w_find.at(i, i) = kSat;
  Tensor2 w_num(m, m, 0.0), w_date(m, m, 0.0), w_reloc(m, m, 0.0);
  for (int i = 0; i < m; ++i) {
    if (inst.num_map[static_cast<size_t>(i)] >= 0)
      w_num.at(i, inst.pidx.numbers[static_cast<size_t>(inst.num_map[static_cast<size_t>(i)])]
                      .token_index) = kSat;
    if (inst.date_map[static_cast<size_t>(i)] >= 0)
      w_date.at(i, inst.pidx.date_groups[static_cast<size_t>(
                                             inst.date_map[static_cast<size_t>(i)])]
                       .token_indices.front()) = kSat;
    w_reloc.at(i, inst.reloc_map[static_cast<size_t>(i)]) = kSat;
  }
  inst.params.set("mod.find.w", w_find);
  inst.params.set("mod.num.w", w_num);
  inst.params.set("mod.date.w", w_date);
  inst.params.set("mod.relocate.w", w_reloc);
  inst.params.set("mod.filter.w", Tensor2(m, m, 0.0));
  inst.params.set("mod.count.a", Tensor2(1, 1, 40.0));
  inst.params.set("mod.count.b", Tensor2(1, 1, -30.0));
  inst.params.set("mod.count.sigma", Tensor2(1, 1, 1.0));

  // program template over the crafted relations
  const int zero_slot = find_slots;
  auto span = [](int k) {
    return "Q[" + std::to_string(k) + ":" + std::to_string(k + 1) + "]";
  };
  auto slot_with = [&](bool singleton, bool needs_number, bool needs_date) {
    std::vector<int> ok;
    for (int k = 0; k < find_slots; ++k) {
      const auto& s = inst.find_sets[static_cast<size_t>(k)];
      if (singleton && s.size() != 1) continue;
      if (!singleton && s.size() < 2) continue;
      bool good = true;
      for (int i : s) {
        if (needs_number && inst.num_map[static_cast<size_t>(i)] < 0) good = false;
        if (needs_date && inst.date_map[static_cast<size_t>(i)] < 0) good = false;
      }
      if (good) ok.push_back(k);
    }
    return ok;
  };

  std::vector<std::string> candidates;
  auto singles_num = slot_with(true, true, false);
  auto singles_date = slot_with(true, false, true);
  auto multi_any = slot_with(false, false, false);
  auto multi_num = slot_with(false, true, false);
  if (!singles_num.empty())
    candidates.push_back("find-num(find(" + span(singles_num[0]) + "))");
  if (!multi_any.empty()) {
    candidates.push_back("span(find(" + span(multi_any[0]) + "))");
    candidates.push_back("count(find(" + span(multi_any[0]) + "))");
  }
  if (!singles_num.empty())
    candidates.push_back("span(relocate(" + span(zero_slot) + ", find(" +
                         span(singles_num[0]) + ")))");
  if (singles_date.size() >= 2 && n_grp >= 1)
    candidates.push_back("year-diff(find-date(find(" + span(singles_date[0]) +
                         ")), find-date(find(" + span(singles_date[1]) + ")))");
  if (singles_num.size() >= 2) {
    int a = singles_num[0], b = singles_num[1];
    int va = inst.num_map[static_cast<size_t>(inst.find_sets[static_cast<size_t>(a)][0])];
    int vb = inst.num_map[static_cast<size_t>(inst.find_sets[static_cast<size_t>(b)][0])];
    if (inst.pidx.numbers[static_cast<size_t>(va)].value !=
        inst.pidx.numbers[static_cast<size_t>(vb)].value)
      candidates.push_back(std::string("span(compare-num-") +
                           (rng.chance(0.5) ? "gt" : "lt") + "-than(find(" + span(a) +
                           "), find(" + span(b) + ")))");
  }
  if (!multi_num.empty())
    candidates.push_back(std::string("find-num(find-") + (rng.chance(0.5) ? "max" : "min") +
                         "-num(find(" + span(multi_num[0]) + ")))");
  if (candidates.empty()) candidates.push_back("count(find(" + span(0) + "))");
  inst.program_text =
      candidates[static_cast<size_t>(rng.bounded(static_cast<int>(candidates.size())))];
  return inst;
}

// ---------------------------------------------------------------------------
// Independent set-semantics executor over the instance's relation maps.
// ---------------------------------------------------------------------------

struct HardValue {
  ValueType type = ValueType::PAtt;
  std::set<int> tokens;
  std::set<int> numbers;
  std::set<int> groups;
  int count = 0;
  int delta = 0;
};

inline Answer hard_execute(const HardInstance& inst, const Program& program) {
  struct Exec {
    const HardInstance& inst;

    HardValue eval(const ProgramNode& node) {
      std::vector<HardValue> ch;
      for (const auto& c : node.children) ch.push_back(eval(*c));
      HardValue v;
      if (node.module == "find") {
        v.type = ValueType::PAtt;
        const auto& s = inst.find_sets[static_cast<size_t>(node.span->begin)];
        v.tokens.insert(s.begin(), s.end());
      } else if (node.module == "relocate") {
        v.type = ValueType::PAtt;
        for (int i : ch[0].tokens) v.tokens.insert(inst.reloc_map[static_cast<size_t>(i)]);
      } else if (node.module == "find-num") {
        v.type = ValueType::NumDist;
        for (int i : ch[0].tokens) v.numbers.insert(inst.num_map[static_cast<size_t>(i)]);
      } else if (node.module == "find-date") {
        v.type = ValueType::DateDist;
        for (int i : ch[0].tokens) v.groups.insert(inst.date_map[static_cast<size_t>(i)]);
      } else if (node.module == "find-max-num" || node.module == "find-min-num") {
        v.type = ValueType::PAtt;
        std::set<int> nums;
        for (int i : ch[0].tokens) nums.insert(inst.num_map[static_cast<size_t>(i)]);
        double best = 0.0;
        bool first = true;
        for (int j : nums) {
          double val = inst.pidx.numbers[static_cast<size_t>(j)].value;
          if (first || (node.module == "find-max-num" ? val > best : val < best)) {
            best = val;
            first = false;
          }
        }
        for (int j : nums)
          if (inst.pidx.numbers[static_cast<size_t>(j)].value == best)
            v.tokens.insert(inst.pidx.numbers[static_cast<size_t>(j)].token_index);
      } else if (node.module == "compare-num-gt-than" ||
                 node.module == "compare-num-lt-than") {
        v.type = ValueType::PAtt;
        auto value_of = [&](const HardValue& side) {
          int i = *side.tokens.begin();
          return inst.pidx.numbers[static_cast<size_t>(inst.num_map[static_cast<size_t>(i)])]
              .value;
        };
        double v1 = value_of(ch[0]), v2 = value_of(ch[1]);
        bool first_wins = node.module == "compare-num-gt-than" ? v1 > v2 : v1 < v2;
        v.tokens = first_wins ? ch[0].tokens : ch[1].tokens;
      } else if (node.module == "count") {
        v.type = ValueType::CountDist;
        v.count = static_cast<int>(ch[0].tokens.size());
      } else if (node.module == "year-diff") {
        v.type = ValueType::YearDiffDist;
        int g1 = *ch[0].groups.begin(), g2 = *ch[1].groups.begin();
        v.delta = std::abs(*inst.pidx.date_groups[static_cast<size_t>(g1)].year -
                           *inst.pidx.date_groups[static_cast<size_t>(g2)].year);
      } else if (node.module == "span") {
        v = ch[0];
        v.type = ValueType::Span;
      }
      return v;
    }

    Answer decode(const HardValue& v) {
      switch (v.type) {
        case ValueType::NumDist:
          return Answer::make_number(
              inst.pidx.numbers[static_cast<size_t>(*v.numbers.begin())].value);
        case ValueType::DateDist: {
          const DateGroup& g = inst.pidx.date_groups[static_cast<size_t>(*v.groups.begin())];
          return Answer::make_date(g.day, g.month, g.year);
        }
        case ValueType::CountDist:
          return Answer::make_count(v.count);
        case ValueType::YearDiffDist:
          return Answer::make_number(v.delta);
        case ValueType::PAtt:
        case ValueType::Span: {
          const int m = inst.pidx.token_count();
          int best_start = 0, best_end = 0, best = -1;
          for (int start = 0; start < m; ++start) {
            int score = 0;
            for (int end = start; end < std::min(m, start + 8); ++end) {
              if (v.tokens.count(end)) ++score;
              if (score > best) {
                best = score;
                best_start = start;
                best_end = end;
              }
            }
          }
          return Answer::make_spans({inst.pidx.span_text(best_start, best_end)});
        }
        case ValueType::QAtt:
          break;
      }
      throw contract_error("hard executor: undecodable value");
    }
  };
  Exec exec{inst};
  return exec.decode(exec.eval(*program.root));
}

inline bool answers_equal(const Answer& a, const Answer& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Answer::Kind::Number: return a.number == b.number;
    case Answer::Kind::Count: return a.count == b.count;
    case Answer::Kind::Date:
      return a.day == b.day && a.month == b.month && a.year == b.year;
    case Answer::Kind::Spans: return a.spans == b.spans;
  }
  return false;
}

// Runs the soft interpreter on the instance and decodes the answer.
inline Answer soft_execute(const HardInstance& inst, const Program& program,
                           const VariantConfig& cfg) {
  Tape tape;
  Tape::Var P = tape.input(inst.P, "P");
  Tape::Var Q = tape.input(inst.Q, "Q");
  ExecutionResult res =
      execute_encoded(tape, program, Q, P, inst.n_q, inst.pidx, inst.params, cfg);
  return decode_answer(res.root.type, tape.value(res.root.var), res.root.deltas, inst.pidx);
}

}  // namespace nmntest
