#include "nmn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "nmn/program.hpp"
#include "nmn/rng.hpp"

namespace nmn {

double SynthMix::total() const {
  return date_compare + date_difference + number_compare + extract_number + count +
         extract_argument;
}

const std::vector<std::string>& synth_type_names() {
  static const std::vector<std::string> names = {"date-compare",   "date-difference",
                                                 "number-compare", "extract-number",
                                                 "count",          "extract-argument"};
  return names;
}

std::vector<int> SynthMix::allocate(int n) const {
  if (std::fabs(total() - 100.0) > 0.5)
    throw contract_error("synth mix must sum to 100 +- 0.5, got " + std::to_string(total()));
  const std::vector<double> pct = {date_compare, date_difference, number_compare,
                                   extract_number, count, extract_argument};
  std::vector<int> counts(pct.size(), 0);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (size_t i = 0; i < pct.size(); ++i) {
    double exact = n * pct[i] / 100.0;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    remainders.push_back({exact - counts[i], static_cast<int>(i)});
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int k = 0; k < n - assigned; ++k) ++counts[remainders[static_cast<size_t>(k)].second];
  return counts;
}

// ---------------------------------------------------------------------------
// Discrete reference executor
// ---------------------------------------------------------------------------

namespace {

struct DiscreteValue {
  ValueType type = ValueType::PAtt;
  std::vector<int> tokens;   // P-att / Span: selected paragraph token indices
  std::vector<int> numbers;  // NumDist: number ids
  std::vector<int> groups;   // DateDist: group ids
  int count = 0;
  int delta = 0;
};

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "the", "a",  "an", "of",  "by", "in",  "on", "did", "was", "is",
      "to",  "and", "or", "who", "what", "how", "many", ",", "?", "."};
  return words;
}

std::set<int> touched_sentences(const ParagraphIndex& pidx, const std::vector<int>& tokens) {
  std::set<int> out;
  for (int t : tokens) out.insert(pidx.sentence_of(t));
  return out;
}

int group_sentence(const ParagraphIndex& pidx, int group) {
  return pidx.sentence_of(pidx.date_groups[group].token_indices.front());
}

struct DiscreteExec {
  const ParagraphIndex& pidx;
  const std::vector<Token>& q_tokens;

  DiscreteValue find(const std::optional<QuestionSpan>& span) {
    int a = span ? span->begin : 0;
    int b = span ? span->end : static_cast<int>(q_tokens.size());
    std::set<std::string> targets;
    for (int k = a; k < b; ++k)
      if (!stopwords().count(q_tokens[k].text)) targets.insert(q_tokens[k].text);
    DiscreteValue v;
    v.type = ValueType::PAtt;
    for (int i = 0; i < pidx.token_count(); ++i)
      if (targets.count(pidx.tokens[i].text)) v.tokens.push_back(i);
    return v;
  }

  DiscreteValue filter(const std::optional<QuestionSpan>& span, const DiscreteValue& in) {
    DiscreteValue matches = find(span);
    std::set<int> keep_sentences = touched_sentences(pidx, matches.tokens);
    DiscreteValue v;
    v.type = ValueType::PAtt;
    for (int t : in.tokens)
      if (keep_sentences.count(pidx.sentence_of(t))) v.tokens.push_back(t);
    if (v.tokens.empty()) v.tokens = in.tokens;  // mirror the soft fallback
    return v;
  }

  DiscreteValue relocate(const DiscreteValue& in) {
    DiscreteValue v;
    v.type = ValueType::PAtt;
    for (int s : touched_sentences(pidx, in.tokens))
      v.tokens.push_back(pidx.sentences[static_cast<size_t>(s)].front());
    std::sort(v.tokens.begin(), v.tokens.end());
    return v;
  }

  DiscreteValue find_num(const DiscreteValue& in) {
    std::set<int> ts = touched_sentences(pidx, in.tokens);
    DiscreteValue v;
    v.type = ValueType::NumDist;
    for (int j = 0; j < pidx.number_count(); ++j)
      if (ts.count(pidx.sentence_of(pidx.numbers[j].token_index))) v.numbers.push_back(j);
    return v;
  }

  DiscreteValue find_date(const DiscreteValue& in) {
    std::set<int> ts = touched_sentences(pidx, in.tokens);
    DiscreteValue v;
    v.type = ValueType::DateDist;
    for (int g = 0; g < static_cast<int>(pidx.date_groups.size()); ++g)
      if (ts.count(group_sentence(pidx, g))) v.groups.push_back(g);
    return v;
  }

  DiscreteValue extreme(const DiscreteValue& in, bool want_max) {
    DiscreteValue nums = in.type == ValueType::NumDist ? in : find_num(in);
    if (nums.numbers.empty())
      throw contract_error("discrete extreme: empty number support");
    double best = pidx.numbers[nums.numbers[0]].value;
    for (int j : nums.numbers) {
      double v = pidx.numbers[j].value;
      best = want_max ? std::max(best, v) : std::min(best, v);
    }
    DiscreteValue v;
    v.type = ValueType::PAtt;
    for (int j : nums.numbers)
      if (pidx.numbers[j].value == best) v.tokens.push_back(pidx.numbers[j].token_index);
    return v;
  }

  DiscreteValue compare(const DiscreteValue& s1, const DiscreteValue& s2, bool want_gt) {
    DiscreteValue n1 = find_num(s1);
    DiscreteValue n2 = find_num(s2);
    if (n1.numbers.size() != 1 || n2.numbers.size() != 1)
      throw contract_error("discrete compare: sides must resolve to one number each");
    double v1 = pidx.numbers[n1.numbers[0]].value;
    double v2 = pidx.numbers[n2.numbers[0]].value;
    if (v1 == v2) {
      DiscreteValue v;
      v.type = ValueType::PAtt;
      v.tokens = s1.tokens;
      v.tokens.insert(v.tokens.end(), s2.tokens.begin(), s2.tokens.end());
      std::sort(v.tokens.begin(), v.tokens.end());
      return v;
    }
    bool first_wins = want_gt ? v1 > v2 : v1 < v2;
    DiscreteValue v;
    v.type = ValueType::PAtt;
    v.tokens = first_wins ? s1.tokens : s2.tokens;
    return v;
  }

  DiscreteValue year_diff(const DiscreteValue& d1, const DiscreteValue& d2) {
    std::set<int> deltas;
    for (int g1 : d1.groups)
      for (int g2 : d2.groups) {
        if (!pidx.date_groups[g1].year || !pidx.date_groups[g2].year)
          throw contract_error("discrete year-diff: group without a year");
        deltas.insert(std::abs(*pidx.date_groups[g1].year - *pidx.date_groups[g2].year));
      }
    if (deltas.size() != 1)
      throw contract_error("discrete year-diff: ambiguous delta support");
    DiscreteValue v;
    v.type = ValueType::YearDiffDist;
    v.delta = *deltas.begin();
    return v;
  }

  DiscreteValue eval(const ProgramNode& node) {
    std::vector<DiscreteValue> ch;
    for (const auto& c : node.children) ch.push_back(eval(*c));
    if (node.module == "find") return find(node.span);
    if (node.module == "filter") return filter(node.span, ch[0]);
    if (node.module == "relocate") return relocate(ch[0]);
    if (node.module == "find-num") {
      DiscreteValue v = find_num(ch[0]);
      v.type = ValueType::NumDist;
      return v;
    }
    if (node.module == "find-date") return find_date(ch[0]);
    if (node.module == "find-max-num") return extreme(ch[0], true);
    if (node.module == "find-min-num") return extreme(ch[0], false);
    if (node.module == "compare-num-gt-than") return compare(ch[0], ch[1], true);
    if (node.module == "compare-num-lt-than") return compare(ch[0], ch[1], false);
    if (node.module == "count") {
      DiscreteValue v;
      v.type = ValueType::CountDist;
      v.count = static_cast<int>(ch[0].tokens.size());
      return v;
    }
    if (node.module == "year-diff") return year_diff(ch[0], ch[1]);
    if (node.module == "span") {
      DiscreteValue v = ch[0];
      v.type = ValueType::Span;
      return v;
    }
    throw contract_error("discrete executor: unknown module '" + node.module + "'");
  }

  // Same span policy as the soft decoder: best window of <= 8 tokens by
  // covered mass (here, membership count), ties to the earliest start.
  std::string decode_span(const std::vector<int>& tokens) const {
    std::set<int> member(tokens.begin(), tokens.end());
    const int m = pidx.token_count();
    int best_start = 0, best_end = 0, best_score = -1;
    for (int start = 0; start < m; ++start) {
      int score = 0;
      for (int end = start; end < std::min(m, start + 8); ++end) {
        score += member.count(end) ? 1 : 0;
        if (score > best_score) {
          best_score = score;
          best_start = start;
          best_end = end;
        }
      }
    }
    return pidx.span_text(best_start, best_end);
  }

  Answer to_answer(const DiscreteValue& v) const {
    switch (v.type) {
      case ValueType::NumDist:
        if (v.numbers.size() != 1)
          throw contract_error("discrete answer: number support is not a singleton");
        return Answer::make_number(pidx.numbers[v.numbers[0]].value);
      case ValueType::DateDist: {
        if (v.groups.size() != 1)
          throw contract_error("discrete answer: date support is not a singleton");
        const DateGroup& g = pidx.date_groups[v.groups[0]];
        return Answer::make_date(g.day, g.month, g.year);
      }
      case ValueType::CountDist:
        return Answer::make_count(v.count);
      case ValueType::YearDiffDist:
        return Answer::make_number(v.delta);
      case ValueType::PAtt:
      case ValueType::Span:
        if (v.tokens.empty())
          throw contract_error("discrete answer: empty token support");
        return Answer::make_spans({decode_span(v.tokens)});
      case ValueType::QAtt:
        break;
    }
    throw contract_error("discrete answer: undecodable type");
  }
};

}  // namespace

Answer discrete_execute(const std::string& program_text, const std::string& question,
                        const std::string& passage) {
  Program program = parse_program(program_text);
  std::vector<Token> q_tokens = tokenize(question);
  typecheck(program, static_cast<int>(q_tokens.size()));
  ParagraphIndex pidx = build_paragraph_index(passage);
  DiscreteExec exec{pidx, q_tokens};
  return exec.to_answer(exec.eval(*program.root));
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& name_pool() {
  static const std::vector<std::string> names = {
      "Rivera",  "Dalton",   "Okafor",  "Mbeki",    "Silva",  "Janssen", "Kowalski",
      "Ueda",    "Moreau",   "Abbasi",  "Osei",     "Petrov", "Lindqvist",
      "Romano",  "Keita",    "Nakamura","Dubois",   "Castillo", "Berg",  "Haruto"};
  return names;
}

const std::vector<std::string>& month_pool() {
  static const std::vector<std::string> months = {
      "January", "February", "March",     "April",   "May",      "June",
      "July",    "August",   "September", "October", "November", "December"};
  return months;
}

const std::vector<std::string>& ordinal_pool() {
  static const std::vector<std::string> ords = {"first", "second", "third", "fourth", "fifth"};
  return ords;
}

const std::vector<std::string>& filler_pool() {
  static const std::vector<std::string> fillers = {
      "The crowd cheered loudly after the play .",
      "The defense held firm on the next series .",
      "Coaches praised the tempo of the unit .",
      "Rain slowed the pace of the game considerably ."};
  return fillers;
}

std::vector<std::string> pick_names(Rng& rng, int k) {
  std::vector<std::string> pool = name_pool();
  for (int i = static_cast<int>(pool.size()) - 1; i > 0; --i)
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(rng.bounded(i + 1))]);
  pool.resize(static_cast<size_t>(k));
  return pool;
}

std::vector<int> distinct_values(Rng& rng, int k, int lo, int hi, int min_gap) {
  std::vector<int> vals;
  int guard = 0;
  while (static_cast<int>(vals.size()) < k) {
    if (++guard > 10000) throw contract_error("synth: value sampling stalled");
    int v = rng.range(lo, hi);
    bool ok = true;
    for (int u : vals)
      if (std::abs(u - v) < min_gap) ok = false;
    if (ok) vals.push_back(v);
  }
  return vals;
}

std::string join_sentences(const std::vector<std::string>& sentences) {
  std::string out;
  for (size_t i = 0; i < sentences.size(); ++i) {
    if (i) out += " ";
    out += sentences[i];
  }
  return out;
}

int question_token_index(const std::string& question, const std::string& word, int nth = 0) {
  std::vector<Token> toks = tokenize(question);
  int seen = 0;
  for (int i = 0; i < static_cast<int>(toks.size()); ++i)
    if (toks[i].text == word && seen++ == nth) return i;
  throw contract_error("synth: token '" + word + "' not found in question");
}

std::string misc_number_sentence(const std::string& name, int value) {
  return name + " ran for " + std::to_string(value) + " yards on the drive .";
}

std::string misc_date_sentence(const std::string& name, const std::string& month, int year) {
  return name + " was appointed in " + month + " " + std::to_string(year) + " .";
}

void shuffle_strings(Rng& rng, std::vector<std::string>& v) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
    std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(rng.bounded(i + 1))]);
}

bool span_mentions(const std::string& span_text, const std::string& name) {
  for (const auto& t : tokenize(span_text))
    if (t.text == name) return true;
  return false;
}

struct RecordBuilder {
  Rng& rng;
  int serial;

  DatasetRecord finish(const std::string& type, std::vector<std::string> sentences,
                       const std::string& question, const std::string& program) {
    DatasetRecord r;
    char pid[32], qid[32];
    std::snprintf(pid, sizeof(pid), "synth-p%05d", serial);
    std::snprintf(qid, sizeof(qid), "synth-q%05d", serial);
    r.passage_id = pid;
    r.query_id = qid;
    r.passage = join_sentences(sentences);
    r.question = question;
    r.program = program;
    r.type = type;
    r.answer = discrete_execute(program, question, r.passage);
    return r;
  }

  DatasetRecord extract_number() {
    auto names = pick_names(rng, rng.range(2, 4));
    const std::string& target = names[0];
    auto values = distinct_values(rng, static_cast<int>(names.size()) + 1, 10, 99, 1);
    const int gold = values[0];
    const int distractor = values[1];

    const bool strike = rng.chance(0.5);
    std::string noun = strike ? "strike" : "run";
    std::string target_sentence =
        target + (strike ? " sealed the half with a " : " capped the drive with a ") +
        std::to_string(gold) + " yard " + noun + " late in the game .";
    std::string question = "How many yards was the " + noun + " by " + target + " ?";

    std::vector<std::string> prefix;
    for (size_t i = 1; i < names.size(); ++i)
      prefix.push_back(misc_number_sentence(names[i], values[i + 1]));
    if (rng.chance(0.4)) prefix.push_back(filler_pool()[static_cast<size_t>(rng.bounded(4))]);
    shuffle_strings(rng, prefix);
    std::vector<std::string> sentences = prefix;
    // the nearest-number trap: a foreign number right before the entity
    sentences.push_back("The previous drive had produced " + std::to_string(distractor) +
                        " points .");
    sentences.push_back(target_sentence);

    int ti = question_token_index(question, target);
    std::string span = "Q[" + std::to_string(ti) + ":" + std::to_string(ti + 1) + "]";
    std::string program = "find-num(" + span + ", find(" + span + "))";
    DatasetRecord r = finish("extract-number", sentences, question, program);

    if (r.answer.kind != Answer::Kind::Number || r.answer.number != gold)
      throw contract_error("synth extract-number: oracle disagrees with the plan");
    assert_cross_sentence_trap(r, target, gold);
    return r;
  }

  void assert_cross_sentence_trap(const DatasetRecord& r, const std::string& target,
                                  int gold) {
    ParagraphIndex pidx = build_paragraph_index(r.passage);
    int name_tok = -1;
    for (int i = 0; i < pidx.token_count(); ++i)
      if (pidx.tokens[i].text == target) name_tok = i;
    int nearest = -1, nearest_dist = 1 << 30;
    for (const auto& nm : pidx.numbers) {
      int d = std::abs(nm.token_index - name_tok);
      if (d < nearest_dist) {
        nearest_dist = d;
        nearest = nm.token_index;
      }
    }
    if (pidx.sentence_of(nearest) == pidx.sentence_of(name_tok) ||
        pidx.tokens[nearest].number_value == static_cast<double>(gold))
      throw contract_error("synth extract-number: trap construction failed");
  }

  DatasetRecord compare_record(bool dates) {
    auto names = pick_names(rng, rng.range(2, 4));
    const std::string &a = names[0], &b = names[1];
    std::vector<std::string> sentences;
    std::string question, verb;
    bool want_gt = rng.chance(0.5);
    int va, vb;
    if (dates) {
      auto years = distinct_values(rng, static_cast<int>(names.size()), 1950, 2010, 1);
      va = years[0];
      vb = years[1];
      const auto& months = month_pool();
      sentences.push_back(a + " joined the council in " +
                          months[static_cast<size_t>(rng.bounded(12))] + " " +
                          std::to_string(va) + " .");
      sentences.push_back(b + " joined the council in " +
                          months[static_cast<size_t>(rng.bounded(12))] + " " +
                          std::to_string(vb) + " .");
      for (size_t i = 2; i < names.size(); ++i)
        sentences.push_back(misc_date_sentence(names[i],
                                               months[static_cast<size_t>(rng.bounded(12))],
                                               years[i]));
      question = std::string("Who joined the council ") + (want_gt ? "later" : "earlier") +
                 " , " + a + " or " + b + " ?";
    } else {
      auto values = distinct_values(rng, static_cast<int>(names.size()), 10, 99, 1);
      va = values[0];
      vb = values[1];
      sentences.push_back(misc_number_sentence(a, va));
      sentences.push_back(misc_number_sentence(b, vb));
      for (size_t i = 2; i < names.size(); ++i)
        sentences.push_back(misc_number_sentence(names[i], values[i]));
      question = std::string("Who ran for ") + (want_gt ? "more" : "fewer") + " yards , " +
                 a + " or " + b + " ?";
    }
    if (rng.chance(0.4)) sentences.push_back(filler_pool()[static_cast<size_t>(rng.bounded(4))]);
    shuffle_strings(rng, sentences);

    int ia = question_token_index(question, a);
    int ib = question_token_index(question, b);
    std::string program = std::string("span(compare-num-") + (want_gt ? "gt" : "lt") +
                          "-than(find(Q[" + std::to_string(ia) + ":" + std::to_string(ia + 1) +
                          "]), find(Q[" + std::to_string(ib) + ":" + std::to_string(ib + 1) +
                          "])))";
    DatasetRecord r = finish(dates ? "date-compare" : "number-compare", sentences, question,
                             program);
    const std::string& winner =
        (want_gt ? (va > vb) : (va < vb)) ? a : b;
    if (r.answer.kind != Answer::Kind::Spans || !span_mentions(r.answer.spans[0], winner))
      throw contract_error("synth compare: oracle span does not cover the expected winner");
    return r;
  }

  DatasetRecord date_difference() {
    auto names = pick_names(rng, rng.range(2, 4));
    const std::string &a = names[0], &b = names[1];
    auto years = distinct_values(rng, static_cast<int>(names.size()), 1950, 2010, 1);
    const auto& months = month_pool();
    std::vector<std::string> sentences;
    sentences.push_back(a + " signed with the club in " +
                        months[static_cast<size_t>(rng.bounded(12))] + " " +
                        std::to_string(years[0]) + " .");
    sentences.push_back(b + " signed with the club in " +
                        months[static_cast<size_t>(rng.bounded(12))] + " " +
                        std::to_string(years[1]) + " .");
    for (size_t i = 2; i < names.size(); ++i)
      sentences.push_back(misc_number_sentence(names[i], 10 + rng.bounded(90)));
    if (rng.chance(0.4)) sentences.push_back(filler_pool()[static_cast<size_t>(rng.bounded(4))]);
    shuffle_strings(rng, sentences);

    std::string question = "How many years passed between the signing of " + a +
                           " and the signing of " + b + " ?";
    int ia = question_token_index(question, a);
    int ib = question_token_index(question, b);
    auto span = [](int i) {
      return "Q[" + std::to_string(i) + ":" + std::to_string(i + 1) + "]";
    };
    std::string program = "year-diff(find-date(" + span(ia) + ", find(" + span(ia) +
                          ")), find-date(" + span(ib) + ", find(" + span(ib) + ")))";
    DatasetRecord r = finish("date-difference", sentences, question, program);
    if (r.answer.kind != Answer::Kind::Number ||
        r.answer.number != std::abs(years[0] - years[1]))
      throw contract_error("synth date-difference: oracle disagrees with the plan");
    return r;
  }

  DatasetRecord count_record() {
    auto names = pick_names(rng, rng.range(2, 3));
    const std::string& target = names[0];
    int c = rng.chance(0.1) ? 0 : rng.range(1, 4);
    std::vector<std::string> sentences;
    std::vector<std::string> ords = ordinal_pool();
    for (int i = 0; i < c; ++i)
      sentences.push_back(target + " kicked a field goal in the " +
                          ords[static_cast<size_t>(i)] + " quarter .");
    auto values = distinct_values(rng, static_cast<int>(names.size()), 10, 99, 1);
    for (size_t i = 1; i < names.size(); ++i)
      sentences.push_back(misc_number_sentence(names[i], values[i]));
    while (sentences.size() < 3)
      sentences.push_back(filler_pool()[static_cast<size_t>(rng.bounded(4))]);
    shuffle_strings(rng, sentences);

    std::string question = "How many field goals did " + target + " kick ?";
    int ti = question_token_index(question, target);
    std::string program =
        "count(find(Q[" + std::to_string(ti) + ":" + std::to_string(ti + 1) + "]))";
    DatasetRecord r = finish("count", sentences, question, program);
    if (r.answer.kind != Answer::Kind::Count || r.answer.count != c)
      throw contract_error("synth count: oracle disagrees with the plan");
    return r;
  }

  DatasetRecord extract_argument() {
    int k = rng.range(3, 4);
    auto names = pick_names(rng, k);
    auto values = distinct_values(rng, k, 10, 99, 2);
    std::vector<std::string> ords = ordinal_pool();
    std::vector<std::string> sentences;
    for (int i = 0; i < k; ++i)
      sentences.push_back(names[static_cast<size_t>(i)] + " kicked a " +
                          std::to_string(values[static_cast<size_t>(i)]) +
                          " yard field goal in the " + ords[static_cast<size_t>(i)] +
                          " quarter .");
    shuffle_strings(rng, sentences);
    if (rng.chance(0.3)) sentences.push_back(filler_pool()[static_cast<size_t>(rng.bounded(4))]);

    bool want_max = rng.chance(0.5);
    std::string question =
        std::string("Who kicked the ") + (want_max ? "longest" : "shortest") + " field goal ?";
    int fi = question_token_index(question, "field");
    std::string fspan = "Q[" + std::to_string(fi) + ":" + std::to_string(fi + 2) + "]";
    std::string program = std::string("span(relocate(Q[0:1], find-") +
                          (want_max ? "max" : "min") + "-num(find(" + fspan + "))))";
    DatasetRecord r = finish("extract-argument", sentences, question, program);
    int best = 0;
    for (int i = 1; i < k; ++i) {
      bool better = want_max ? values[static_cast<size_t>(i)] > values[static_cast<size_t>(best)]
                             : values[static_cast<size_t>(i)] < values[static_cast<size_t>(best)];
      if (better) best = i;
    }
    if (r.answer.kind != Answer::Kind::Spans ||
        !span_mentions(r.answer.spans[0], names[static_cast<size_t>(best)]))
      throw contract_error("synth extract-argument: oracle span misses the expected name");
    return r;
  }
};

}  // namespace

std::vector<DatasetRecord> synth_generate(int n, uint64_t seed, const SynthMix& mix) {
  std::vector<int> counts = mix.allocate(n);
  std::vector<int> sequence;
  for (size_t t = 0; t < counts.size(); ++t)
    sequence.insert(sequence.end(), static_cast<size_t>(counts[t]), static_cast<int>(t));
  Rng rng(seed);
  for (int i = static_cast<int>(sequence.size()) - 1; i > 0; --i)
    std::swap(sequence[static_cast<size_t>(i)],
              sequence[static_cast<size_t>(rng.bounded(i + 1))]);

  std::vector<DatasetRecord> records;
  records.reserve(sequence.size());
  for (size_t i = 0; i < sequence.size(); ++i) {
    RecordBuilder rb{rng, static_cast<int>(i)};
    switch (sequence[i]) {
      case 0: records.push_back(rb.compare_record(true)); break;
      case 1: records.push_back(rb.date_difference()); break;
      case 2: records.push_back(rb.compare_record(false)); break;
      case 3: records.push_back(rb.extract_number()); break;
      case 4: records.push_back(rb.count_record()); break;
      case 5: records.push_back(rb.extract_argument()); break;
      default: throw contract_error("synth: bad type id");
    }
  }
  return records;
}

}  // namespace nmn
