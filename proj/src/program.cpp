#include "nmn/program.hpp"

#include <cctype>
#include <algorithm>
#include <functional>
#include <sstream>

namespace nmn {

std::string value_type_name(ValueType t) {
  switch (t) {
    case ValueType::QAtt: return "Q-att";
    case ValueType::PAtt: return "P-att";
    case ValueType::NumDist: return "NumDist";
    case ValueType::DateDist: return "DateDist";
    case ValueType::CountDist: return "CountDist";
    case ValueType::YearDiffDist: return "YearDiffDist";
    case ValueType::Span: return "Span";
  }
  return "?";
}

const std::vector<ModuleSignature>& signature_table() {
  using VT = ValueType;
  static const std::vector<ModuleSignature> table = {
      {"find", {}, VT::PAtt, true},
      {"filter", {VT::PAtt}, VT::PAtt, true},
      {"relocate", {VT::PAtt}, VT::PAtt, true},
      {"find-num", {VT::PAtt}, VT::NumDist, true},
      {"find-date", {VT::PAtt}, VT::DateDist, true},
      {"find-max-num", {VT::PAtt}, VT::PAtt, false},
      {"find-min-num", {VT::PAtt}, VT::PAtt, false},
      {"compare-num-lt-than", {VT::PAtt, VT::PAtt}, VT::PAtt, false},
      {"compare-num-gt-than", {VT::PAtt, VT::PAtt}, VT::PAtt, false},
      {"count", {VT::PAtt}, VT::CountDist, false},
      {"year-diff", {VT::DateDist, VT::DateDist}, VT::YearDiffDist, false},
      {"span", {VT::PAtt}, VT::Span, false},
  };
  return table;
}

const ModuleSignature* find_signature(const std::string& name) {
  for (const auto& sig : signature_table())
    if (sig.name == name) return &sig;
  return nullptr;
}

int Program::node_count() const {
  if (!root) return 0;
  std::function<int(const ProgramNode&)> walk = [&](const ProgramNode& n) {
    int c = 1;
    for (const auto& ch : n.children) c += walk(*ch);
    return c;
  };
  return walk(*root);
}

int Program::depth() const {
  if (!root) return 0;
  std::function<int(const ProgramNode&)> walk = [&](const ProgramNode& n) {
    int d = 0;
    for (const auto& ch : n.children) d = std::max(d, walk(*ch));
    return d + 1;
  };
  return walk(*root);
}

namespace {

struct Parser {
  const std::string& text;
  size_t pos = 0;
  int line = 1;
  int col = 1;

  explicit Parser(const std::string& t) : text(t) {}

  [[noreturn]] void fail(const std::string& msg) { throw parse_error(msg, line, col); }

  void advance() {
    if (pos < text.size()) {
      if (text[pos] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++pos;
    }
  }

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) advance();
  }

  char peek() const { return pos < text.size() ? text[pos] : '\0'; }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    advance();
  }

  bool name_char(char c) const {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  }

  std::string parse_name() {
    skip_ws();
    size_t start = pos;
    while (pos < text.size() && name_char(text[pos])) advance();
    if (pos == start) fail("expected a module name");
    return text.substr(start, pos - start);
  }

  int parse_int() {
    skip_ws();
    size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) advance();
    if (pos == start) fail("expected an integer");
    return std::stoi(text.substr(start, pos - start));
  }

  QuestionSpan parse_span() {
    // caller consumed 'Q'
    skip_ws();
    expect('[');
    int a = parse_int();
    skip_ws();
    expect(':');
    int b = parse_int();
    skip_ws();
    expect(']');
    return QuestionSpan{a, b};
  }

  std::unique_ptr<ProgramNode> parse_call() {
    std::string name = parse_name();
    const ModuleSignature* sig = find_signature(name);
    if (sig == nullptr) fail("unknown module '" + name + "'");
    auto node = std::make_unique<ProgramNode>();
    node->module = name;
    skip_ws();
    expect('(');
    skip_ws();
    bool first = true;
    while (peek() != ')') {
      if (!first) {
        expect(',');
        skip_ws();
      }
      // a span literal is 'Q' followed by '[', anything else is a call
      size_t save_pos = pos;
      int save_line = line, save_col = col;
      if (peek() == 'Q') {
        advance();
        skip_ws();
        if (peek() == '[') {
          QuestionSpan sp = parse_span();
          if (!first || !sig->accepts_span)
            fail("module '" + name + "' does not take a span argument here");
          if (node->span) fail("duplicate span argument");
          node->span = sp;
          skip_ws();
          first = false;
          continue;
        }
        pos = save_pos;
        line = save_line;
        col = save_col;
      }
      node->children.push_back(parse_call());
      skip_ws();
      first = false;
    }
    expect(')');
    if (node->children.size() != sig->inputs.size())
      fail("module '" + name + "' expects " + std::to_string(sig->inputs.size()) +
           " module argument(s), got " + std::to_string(node->children.size()));
    return node;
  }
};

void typecheck_node(ProgramNode& node, int question_tokens) {
  const ModuleSignature* sig = find_signature(node.module);
  if (sig == nullptr) throw parse_error("unknown module '" + node.module + "'", 0, 0);
  for (size_t i = 0; i < node.children.size(); ++i) {
    typecheck_node(*node.children[i], question_tokens);
    if (node.children[i]->type != sig->inputs[i])
      throw parse_error("module '" + node.module + "' argument " + std::to_string(i + 1) +
                            ": expected " + value_type_name(sig->inputs[i]) + ", got " +
                            value_type_name(node.children[i]->type),
                        0, 0);
  }
  if (node.span) {
    if (!sig->accepts_span)
      throw parse_error("module '" + node.module + "' does not take a span argument", 0, 0);
    if (node.span->begin < 0 || node.span->begin >= node.span->end ||
        node.span->end > question_tokens)
      throw parse_error("span Q[" + std::to_string(node.span->begin) + ":" +
                            std::to_string(node.span->end) + "] out of range for a " +
                            std::to_string(question_tokens) + "-token question",
                        0, 0);
  }
  node.type = sig->output;
}

void print_node(const ProgramNode& node, std::ostringstream& os) {
  os << node.module << "(";
  bool first = true;
  if (node.span) {
    os << "Q[" << node.span->begin << ":" << node.span->end << "]";
    first = false;
  }
  for (const auto& ch : node.children) {
    if (!first) os << ", ";
    print_node(*ch, os);
    first = false;
  }
  os << ")";
}

bool nodes_equal(const ProgramNode& a, const ProgramNode& b) {
  if (a.module != b.module) return false;
  if (a.span.has_value() != b.span.has_value()) return false;
  if (a.span && !(*a.span == *b.span)) return false;
  if (a.children.size() != b.children.size()) return false;
  for (size_t i = 0; i < a.children.size(); ++i)
    if (!nodes_equal(*a.children[i], *b.children[i])) return false;
  return true;
}

}  // namespace

Program parse_program(const std::string& text) {
  Parser p(text);
  p.skip_ws();
  if (p.pos >= text.size()) p.fail("empty program");
  Program prog;
  prog.root = p.parse_call();
  p.skip_ws();
  if (p.pos < text.size()) p.fail("trailing input after program");
  return prog;
}

void typecheck(Program& program, int question_tokens) {
  if (!program.root) throw parse_error("empty program", 0, 0);
  if (program.depth() > kMaxProgramDepth)
    throw parse_error("program depth " + std::to_string(program.depth()) +
                          " exceeds the decode budget of " + std::to_string(kMaxProgramDepth),
                      0, 0);
  typecheck_node(*program.root, question_tokens);
}

std::string print_program(const Program& program) {
  if (!program.root) return "";
  std::ostringstream os;
  print_node(*program.root, os);
  return os.str();
}

bool structurally_equal(const Program& a, const Program& b) {
  if (!a.root || !b.root) return a.root == b.root;
  return nodes_equal(*a.root, *b.root);
}

}  // namespace nmn
