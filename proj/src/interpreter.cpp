#include "nmn/interpreter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace nmn {

namespace {

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> column_labels(ValueType type, const ParagraphIndex& pidx,
                                       const std::vector<int>& deltas) {
  std::vector<std::string> labels;
  switch (type) {
    case ValueType::PAtt:
    case ValueType::Span:
      for (const auto& t : pidx.tokens) labels.push_back(t.text);
      break;
    case ValueType::NumDist:
      for (const auto& nm : pidx.numbers) labels.push_back(format_double(nm.value));
      break;
    case ValueType::DateDist:
      for (const auto& g : pidx.date_groups) {
        Answer a = Answer::make_date(g.day, g.month, g.year);
        labels.push_back(a.to_display());
      }
      break;
    case ValueType::CountDist:
      for (int k = 0; k < kCountSupport; ++k) labels.push_back(std::to_string(k));
      break;
    case ValueType::YearDiffDist:
      for (int d : deltas) labels.push_back(std::to_string(d));
      break;
    case ValueType::QAtt:
      break;
  }
  return labels;
}

struct Evaluator {
  ModuleContext& ctx;
  int n_q;
  ExecutionTrace& trace;

  ModuleValue eval(const ProgramNode& node) {
    std::vector<ModuleValue> children;
    children.reserve(node.children.size());
    for (const auto& ch : node.children) children.push_back(eval(*ch));

    Tape::Var q_arg;  // invalid means "whole question"
    if (node.span)
      q_arg = ctx.tape.input(question_span_attention(node.span->begin, node.span->end, n_q),
                             "span-arg");

    const size_t aux_before = ctx.aux->terms.size();
    ModuleValue out;
    out.type = node.type;
    try {
      if (node.module == "find") {
        out.var = module_find(ctx, q_arg);
      } else if (node.module == "filter") {
        out.var = module_filter(ctx, q_arg, children[0].var);
      } else if (node.module == "relocate") {
        out.var = module_relocate(ctx, q_arg, children[0].var);
      } else if (node.module == "find-num") {
        out.var = module_find_num(ctx, children[0].var, q_arg);
      } else if (node.module == "find-date") {
        out.var = module_find_date(ctx, children[0].var, q_arg);
      } else if (node.module == "find-max-num") {
        out.var = module_find_extreme_num(ctx, children[0].var, ExtremeMode::Max);
      } else if (node.module == "find-min-num") {
        out.var = module_find_extreme_num(ctx, children[0].var, ExtremeMode::Min);
      } else if (node.module == "compare-num-lt-than") {
        out.var = module_compare_num(ctx, children[0].var, children[1].var, CompareMode::Lt);
      } else if (node.module == "compare-num-gt-than") {
        out.var = module_compare_num(ctx, children[0].var, children[1].var, CompareMode::Gt);
      } else if (node.module == "count") {
        out.var = module_count(ctx, children[0].var);
      } else if (node.module == "year-diff") {
        YearDiffResult r = module_year_diff(ctx, children[0].var, children[1].var);
        out.var = r.dist;
        out.deltas = std::move(r.deltas);
      } else if (node.module == "span") {
        out.var = children[0].var;  // identity; retagged as a span answer
      } else {
        throw exec_error("no implementation for module '" + node.module + "'");
      }
    } catch (const exec_error& e) {
      throw exec_error("node '" + node.module + "': " + e.what());
    }

    TraceNode tn;
    tn.module = node.module;
    tn.span = node.span;
    tn.type = node.type;
    for (const auto& ch : children) tn.inputs.push_back(ctx.tape.value(ch.var));
    tn.output = ctx.tape.value(out.var);
    tn.labels = column_labels(node.type, ctx.pidx, out.deltas);
    for (size_t i = aux_before; i < ctx.aux->terms.size(); ++i)
      tn.aux += ctx.tape.value(ctx.aux->terms[i].second).at(0, 0);
    trace.nodes.push_back(std::move(tn));
    return out;
  }
};

}  // namespace

ExecutionResult execute_encoded(Tape& tape, const Program& program, Tape::Var question_rep,
                                Tape::Var paragraph_rep, int n_q, const ParagraphIndex& pidx,
                                const ParamStore& params, const VariantConfig& cfg) {
  cfg.validate();
  if (!program.root) throw contract_error("execute: empty program");

  ExecutionResult result;
  AuxAccumulator aux;
  ModuleContext ctx{tape,          pidx,
                    params,        cfg,
                    paragraph_rep, question_rep,
                    question_span_attention(0, n_q, n_q),
                    &aux,          &result.fallback_rows};
  result.trace.program_text = print_program(program);
  Evaluator ev{ctx, n_q, result.trace};
  result.root = ev.eval(*program.root);
  result.total_aux = aux.total(tape);
  result.trace.total_aux = tape.value(result.total_aux).at(0, 0);
  return result;
}

RunOutput execute(const std::string& program_text, const std::string& question,
                  const std::string& paragraph, const Model& model, const VariantConfig& cfg) {
  Program program = parse_program(program_text);
  std::vector<Token> q_tokens = build_question_tokens(question);
  typecheck(program, static_cast<int>(q_tokens.size()));
  ParagraphIndex pidx = build_paragraph_index(paragraph);
  if (pidx.tokens.empty()) throw exec_error("execute: empty paragraph");

  Tape tape;
  EncodedPair enc = encode_pair(tape, model, q_tokens, pidx.tokens);
  ExecutionResult res = execute_encoded(tape, program, enc.question, enc.paragraph,
                                        static_cast<int>(q_tokens.size()), pidx, model.params,
                                        cfg);
  RunOutput out;
  out.answer =
      decode_answer(res.root.type, tape.value(res.root.var), res.root.deltas, pidx);
  out.trace = std::move(res.trace);
  out.trace.answer = out.answer;
  return out;
}

Answer decode_answer(ValueType type, const Tensor2& dist, const std::vector<int>& deltas,
                     const ParagraphIndex& pidx, int max_span_len) {
  if (dist.rows != 1) throw contract_error("decode_answer: expected a row distribution");
  auto argmax = [&]() {
    int best = 0;
    for (int j = 1; j < dist.cols; ++j)
      if (dist.at(0, j) > dist.at(0, best)) best = j;
    return best;
  };
  switch (type) {
    case ValueType::NumDist:
      return Answer::make_number(pidx.numbers[argmax()].value);
    case ValueType::DateDist: {
      const DateGroup& g = pidx.date_groups[argmax()];
      return Answer::make_date(g.day, g.month, g.year);
    }
    case ValueType::CountDist:
      return Answer::make_count(argmax());
    case ValueType::YearDiffDist:
      return Answer::make_number(deltas[argmax()]);
    case ValueType::PAtt:
    case ValueType::Span: {
      // best contiguous span by summed mass, ties to the earliest start
      const int m = dist.cols;
      int best_start = 0, best_end = 0;
      double best_mass = -1.0;
      for (int start = 0; start < m; ++start) {
        double mass = 0.0;
        for (int end = start; end < std::min(m, start + max_span_len); ++end) {
          mass += dist.at(0, end);
          if (mass > best_mass) {
            best_mass = mass;
            best_start = start;
            best_end = end;
          }
        }
      }
      return Answer::make_spans({pidx.span_text(best_start, best_end)});
    }
    case ValueType::QAtt:
      break;
  }
  throw contract_error("decode_answer: value type " + value_type_name(type) +
                       " is not decodable");
}

std::string dump_trace(const ExecutionTrace& trace, TraceFormat format) {
  if (format == TraceFormat::Json) {
    nlohmann::json j;
    j["program"] = trace.program_text;
    j["total_aux"] = trace.total_aux;
    if (trace.answer) j["answer"] = trace.answer->to_display();
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : trace.nodes) {
      nlohmann::json nj;
      nj["module"] = n.module;
      if (n.span) nj["span"] = {n.span->begin, n.span->end};
      nj["type"] = value_type_name(n.type);
      nj["aux"] = n.aux;
      nj["labels"] = n.labels;
      nj["values"] = n.output.data;
      nodes.push_back(std::move(nj));
    }
    j["nodes"] = std::move(nodes);
    return j.dump(2);
  }
  std::ostringstream os;
  os << "node,module,type,label,value\n";
  for (size_t i = 0; i < trace.nodes.size(); ++i) {
    const auto& n = trace.nodes[i];
    for (size_t k = 0; k < n.output.data.size(); ++k) {
      std::string label = k < n.labels.size() ? n.labels[k] : std::to_string(k);
      for (char& c : label)
        if (c == ',') c = ';';
      os << i << "," << n.module << "," << value_type_name(n.type) << "," << label << ","
         << format_double(n.output.data[k]) << "\n";
    }
  }
  return os.str();
}

}  // namespace nmn
