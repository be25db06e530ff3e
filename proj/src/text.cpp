#include "nmn/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "nmn/log.hpp"
#include "json.hpp"

namespace nmn {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }
bool is_digit(unsigned char c) { return std::isdigit(c) != 0; }

const std::set<std::string>& abbreviations() {
  static const std::set<std::string> abbrs = {
      "Mr", "Mrs", "Ms", "Dr", "St", "Jr", "Sr", "Prof", "Gen",  "Col",
      "Lt", "Sgt", "Rev", "Hon", "vs", "etc", "Inc", "Ltd", "Co", "No"};
  return abbrs;
}

const std::map<std::string, int>& month_table() {
  static const std::map<std::string, int> months = {
      {"january", 1},  {"february", 2}, {"march", 3},     {"april", 4},
      {"may", 5},      {"june", 6},     {"july", 7},      {"august", 8},
      {"september", 9},{"october", 10}, {"november", 11}, {"december", 12},
      {"jan", 1},      {"feb", 2},      {"mar", 3},       {"apr", 4},
      {"jun", 6},      {"jul", 7},      {"aug", 8},       {"sep", 9},
      {"sept", 9},     {"oct", 10},     {"nov", 11},      {"dec", 12}};
  return months;
}

const std::map<std::string, double>& number_words() {
  static const std::map<std::string, double> words = {
      {"zero", 0},    {"one", 1},     {"two", 2},       {"three", 3},
      {"four", 4},    {"five", 5},    {"six", 6},       {"seven", 7},
      {"eight", 8},   {"nine", 9},    {"ten", 10},      {"eleven", 11},
      {"twelve", 12}, {"thirteen", 13},{"fourteen", 14},{"fifteen", 15},
      {"sixteen", 16},{"seventeen", 17},{"eighteen", 18},{"nineteen", 19},
      {"twenty", 20}, {"thirty", 30}, {"forty", 40},    {"fifty", 50},
      {"sixty", 60},  {"seventy", 70},{"eighty", 80},   {"ninety", 90}};
  return words;
}

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<int> month_of(const std::string& tok) {
  auto it = month_table().find(lower(tok));
  if (it == month_table().end()) return std::nullopt;
  return it->second;
}

std::optional<long> small_int(const std::string& tok) {
  if (tok.empty() || tok.size() > 6) return std::nullopt;
  for (unsigned char c : tok)
    if (!is_digit(c)) return std::nullopt;
  return std::strtol(tok.c_str(), nullptr, 10);
}

// Digit literal with optional comma grouping and a single decimal point.
std::optional<double> numeric_literal(const std::string& tok) {
  bool saw_digit = false;
  int dots = 0;
  for (unsigned char c : tok) {
    if (is_digit(c)) {
      saw_digit = true;
    } else if (c == ',') {
      continue;
    } else if (c == '.') {
      if (++dots > 1) return std::nullopt;
    } else {
      return std::nullopt;
    }
  }
  if (!saw_digit) return std::nullopt;
  std::string stripped;
  stripped.reserve(tok.size());
  for (char c : tok)
    if (c != ',') stripped.push_back(c);
  double v = std::strtod(stripped.c_str(), nullptr);
  if (!std::isfinite(v)) {
    logging::info("extract_numbers: literal '" + tok + "' overflows, skipped");
    return std::nullopt;
  }
  return v;
}

}  // namespace

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> tokens;
  const int n = static_cast<int>(text.size());
  int i = 0;
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    Token t;
    t.begin = i;
    if (is_word_char(c)) {
      int j = i + 1;
      while (j < n) {
        unsigned char cj = static_cast<unsigned char>(text[j]);
        if (is_word_char(cj)) {
          ++j;
        } else if ((cj == '-' || cj == '\'') && j + 1 < n &&
                   is_word_char(static_cast<unsigned char>(text[j + 1]))) {
          ++j;
        } else if ((cj == '.' || cj == ',') && j + 1 < n &&
                   is_digit(static_cast<unsigned char>(text[j + 1])) &&
                   is_digit(static_cast<unsigned char>(text[j - 1]))) {
          ++j;
        } else {
          break;
        }
      }
      t.end = j;
      i = j;
    } else {
      t.end = i + 1;
      ++i;
    }
    t.text = text.substr(t.begin, t.end - t.begin);
    tokens.push_back(std::move(t));
  }
  return tokens;
}

std::vector<std::vector<int>> segment_sentences(std::vector<Token>& tokens) {
  std::vector<std::vector<int>> sentences;
  std::vector<int> current;
  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    current.push_back(i);
    const std::string& t = tokens[i].text;
    bool terminal = t == "." || t == "!" || t == "?";
    if (terminal && t == "." && i > 0 && abbreviations().count(tokens[i - 1].text)) {
      terminal = false;
    }
    if (terminal) {
      sentences.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  for (int s = 0; s < static_cast<int>(sentences.size()); ++s)
    for (int idx : sentences[s]) tokens[idx].sentence_id = s;
  return sentences;
}

std::vector<NumberMention> extract_numbers(const std::vector<Token>& tokens) {
  std::vector<NumberMention> out;
  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    if (auto v = numeric_literal(tokens[i].text)) {
      out.push_back({i, *v});
      continue;
    }
    auto it = number_words().find(lower(tokens[i].text));
    if (it != number_words().end()) out.push_back({i, it->second});
  }
  return out;
}

std::vector<DateGroup> extract_dates(const std::vector<Token>& tokens) {
  std::vector<DateGroup> groups;
  const int n = static_cast<int>(tokens.size());
  auto day_of = [&](int idx) -> std::optional<int> {
    auto v = small_int(tokens[idx].text);
    if (v && *v >= 1 && *v <= 31) return static_cast<int>(*v);
    return std::nullopt;
  };
  auto year_of = [&](int idx) -> std::optional<int> {
    auto v = small_int(tokens[idx].text);
    if (v && *v >= 1000 && *v <= 2100) return static_cast<int>(*v);
    return std::nullopt;
  };

  int i = 0;
  while (i < n) {
    DateGroup g;
    // Day Month Year
    if (i + 2 < n && day_of(i) && month_of(tokens[i + 1].text) && year_of(i + 2)) {
      g.day = day_of(i);
      g.month = month_of(tokens[i + 1].text);
      g.year = year_of(i + 2);
      g.token_indices = {i, i + 1, i + 2};
      logging::debug("extract_dates: day-month-year at token " + std::to_string(i) +
                     " (shorter day-month reading discarded)");
      groups.push_back(std::move(g));
      i += 3;
      continue;
    }
    // Month Year | Month Day
    if (i + 1 < n && month_of(tokens[i].text)) {
      if (year_of(i + 1)) {
        g.month = month_of(tokens[i].text);
        g.year = year_of(i + 1);
        g.token_indices = {i, i + 1};
        groups.push_back(std::move(g));
        i += 2;
        continue;
      }
      if (day_of(i + 1)) {
        g.month = month_of(tokens[i].text);
        g.day = day_of(i + 1);
        g.token_indices = {i, i + 1};
        groups.push_back(std::move(g));
        i += 2;
        continue;
      }
    }
    // Day Month
    if (i + 1 < n && day_of(i) && month_of(tokens[i + 1].text)) {
      g.day = day_of(i);
      g.month = month_of(tokens[i + 1].text);
      g.token_indices = {i, i + 1};
      groups.push_back(std::move(g));
      i += 2;
      continue;
    }
    // Year alone
    if (year_of(i)) {
      g.year = year_of(i);
      g.token_indices = {i};
      groups.push_back(std::move(g));
      i += 1;
      continue;
    }
    ++i;
  }
  return groups;
}

std::vector<int> ParagraphIndex::date_token_indices() const {
  std::vector<int> out;
  for (const auto& g : date_groups)
    out.insert(out.end(), g.token_indices.begin(), g.token_indices.end());
  return out;
}

std::vector<int> ParagraphIndex::date_token_groups() const {
  std::vector<int> out;
  for (int g = 0; g < static_cast<int>(date_groups.size()); ++g)
    out.insert(out.end(), date_groups[g].token_indices.size(), g);
  return out;
}

std::string ParagraphIndex::span_text(int first_token, int last_token) const {
  if (first_token < 0 || last_token >= token_count() || first_token > last_token)
    throw contract_error("span_text: bad token range");
  return text.substr(tokens[first_token].begin,
                     tokens[last_token].end - tokens[first_token].begin);
}

ParagraphIndex build_paragraph_index(const std::string& text, int max_tokens) {
  ParagraphIndex idx;
  idx.text = text;
  idx.tokens = tokenize(text);
  if (static_cast<int>(idx.tokens.size()) > max_tokens) {
    logging::info("build_paragraph_index: input has " + std::to_string(idx.tokens.size()) +
                  " tokens, truncating to " + std::to_string(max_tokens));
    idx.tokens.resize(max_tokens);
  }
  idx.sentences = segment_sentences(idx.tokens);
  idx.numbers = extract_numbers(idx.tokens);
  for (const auto& nm : idx.numbers) idx.tokens[nm.token_index].number_value = nm.value;
  idx.date_groups = extract_dates(idx.tokens);
  for (auto& g : idx.date_groups) {
    int s = idx.tokens[g.token_indices.front()].sentence_id;
    for (int t : g.token_indices) {
      if (idx.tokens[t].sentence_id != s) g.cross_sentence = true;
      if (!idx.tokens[t].date_part) {
        // tag member tokens with the part they carry, best effort
        if (small_int(idx.tokens[t].text)) {
          auto v = small_int(idx.tokens[t].text);
          idx.tokens[t].date_part =
              (*v >= 1000) ? DatePartKind::Year : DatePartKind::Day;
        } else {
          idx.tokens[t].date_part = DatePartKind::Month;
        }
      }
    }
  }
  return idx;
}

Answer Answer::make_number(double v) {
  Answer a;
  a.kind = Kind::Number;
  a.number = v;
  return a;
}

Answer Answer::make_date(std::optional<int> d, std::optional<int> m, std::optional<int> y) {
  Answer a;
  a.kind = Kind::Date;
  a.day = d;
  a.month = m;
  a.year = y;
  return a;
}

Answer Answer::make_spans(std::vector<std::string> s) {
  Answer a;
  a.kind = Kind::Spans;
  a.spans = std::move(s);
  return a;
}

Answer Answer::make_count(int c) {
  Answer a;
  a.kind = Kind::Count;
  a.count = c;
  return a;
}

std::string Answer::to_display() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Number: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%g", number);
      os << buf;
      break;
    }
    case Kind::Date:
      if (day) os << *day << " ";
      if (month) os << *month << " ";
      if (year) os << *year;
      break;
    case Kind::Spans:
      for (size_t i = 0; i < spans.size(); ++i) os << (i ? "; " : "") << spans[i];
      break;
    case Kind::Count:
      os << count;
      break;
  }
  return os.str();
}

namespace {

using nlohmann::json;

Answer parse_answer(const json& j, const std::string& qid) {
  int kinds = 0;
  kinds += j.contains("number") ? 1 : 0;
  kinds += j.contains("date") ? 1 : 0;
  kinds += j.contains("spans") ? 1 : 0;
  kinds += j.contains("count") ? 1 : 0;
  if (kinds != 1)
    throw data_error("record '" + qid + "': answer must carry exactly one of "
                     "number/date/spans/count, found " + std::to_string(kinds));
  if (j.contains("number")) {
    if (!j["number"].is_number())
      throw data_error("record '" + qid + "': answer.number is not numeric");
    return Answer::make_number(j["number"].get<double>());
  }
  if (j.contains("count")) {
    if (!j["count"].is_number_integer())
      throw data_error("record '" + qid + "': answer.count is not an integer");
    return Answer::make_count(j["count"].get<int>());
  }
  if (j.contains("spans")) {
    if (!j["spans"].is_array() || j["spans"].empty())
      throw data_error("record '" + qid + "': answer.spans must be a non-empty array");
    std::vector<std::string> spans;
    for (const auto& s : j["spans"]) {
      if (!s.is_string()) throw data_error("record '" + qid + "': answer.spans entry not a string");
      spans.push_back(s.get<std::string>());
    }
    return Answer::make_spans(std::move(spans));
  }
  const json& d = j["date"];
  if (!d.is_object()) throw data_error("record '" + qid + "': answer.date is not an object");
  auto opt_int = [&](const char* key) -> std::optional<int> {
    if (!d.contains(key)) return std::nullopt;
    if (!d[key].is_number_integer())
      throw data_error("record '" + qid + "': answer.date." + key + " is not an integer");
    return d[key].get<int>();
  };
  return Answer::make_date(opt_int("day"), opt_int("month"), opt_int("year"));
}

json answer_to_json(const Answer& a) {
  json j;
  switch (a.kind) {
    case Answer::Kind::Number:
      j["number"] = a.number;
      break;
    case Answer::Kind::Count:
      j["count"] = a.count;
      break;
    case Answer::Kind::Spans:
      j["spans"] = a.spans;
      break;
    case Answer::Kind::Date: {
      json d = json::object();
      if (a.day) d["day"] = *a.day;
      if (a.month) d["month"] = *a.month;
      if (a.year) d["year"] = *a.year;
      j["date"] = d;
      break;
    }
  }
  return j;
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key))
    throw data_error(where + ": missing required field '" + key + "'");
  return j[key];
}

}  // namespace

std::vector<DatasetRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("load_dataset: cannot open '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw data_error("load_dataset: " + std::string(e.what()));
  }
  std::vector<DatasetRecord> records;
  const json& passages = require(root, "passages", "dataset root");
  if (!passages.is_array()) throw data_error("dataset root: 'passages' must be an array");
  for (const auto& p : passages) {
    std::string pid = require(p, "passage_id", "passage entry").get<std::string>();
    std::string passage = require(p, "passage", "passage '" + pid + "'").get<std::string>();
    const json& qas = require(p, "qa_pairs", "passage '" + pid + "'");
    for (const auto& qa : qas) {
      DatasetRecord r;
      r.passage_id = pid;
      r.passage = passage;
      r.query_id = require(qa, "query_id", "passage '" + pid + "' qa entry").get<std::string>();
      r.question = require(qa, "question", "record '" + r.query_id + "'").get<std::string>();
      if (qa.contains("program")) r.program = qa["program"].get<std::string>();
      if (qa.contains("type")) r.type = qa["type"].get<std::string>();
      r.answer = parse_answer(require(qa, "answer", "record '" + r.query_id + "'"), r.query_id);
      records.push_back(std::move(r));
    }
  }
  return records;
}

void save_dataset(const std::vector<DatasetRecord>& records, const std::string& path) {
  json passages = json::array();
  json* current = nullptr;
  std::string current_id;
  for (const auto& r : records) {
    if (current == nullptr || r.passage_id != current_id) {
      json p;
      p["passage_id"] = r.passage_id;
      p["passage"] = r.passage;
      p["qa_pairs"] = json::array();
      passages.push_back(std::move(p));
      current = &passages.back();
      current_id = r.passage_id;
    }
    json qa;
    qa["query_id"] = r.query_id;
    qa["question"] = r.question;
    if (r.program) qa["program"] = *r.program;
    if (r.type) qa["type"] = *r.type;
    qa["answer"] = answer_to_json(r.answer);
    (*current)["qa_pairs"].push_back(std::move(qa));
  }
  json root;
  root["passages"] = std::move(passages);
  std::ofstream out(path);
  if (!out) throw data_error("save_dataset: cannot open '" + path + "' for writing");
  out << root.dump(2) << "\n";
}

}  // namespace nmn
