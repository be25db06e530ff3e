#include "nmn/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>

namespace nmn {

std::string normalize_answer_text(const std::string& s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (unsigned char c : s) {
    if (std::isalnum(c) || c >= 0x80 || c == '.') {
      cleaned.push_back(static_cast<char>(std::tolower(c)));
    } else {
      cleaned.push_back(' ');
    }
  }
  std::istringstream is(cleaned);
  std::string tok, out;
  while (is >> tok) {
    // keep '.' only when it looks like a decimal point
    std::string filtered;
    for (size_t i = 0; i < tok.size(); ++i) {
      if (tok[i] == '.' &&
          !(i > 0 && std::isdigit(static_cast<unsigned char>(tok[i - 1])) &&
            i + 1 < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i + 1]))))
        continue;
      filtered.push_back(tok[i]);
    }
    if (filtered.empty() || filtered == "a" || filtered == "an" || filtered == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += filtered;
  }
  return out;
}

std::vector<std::string> normalize_answer_tokens(const std::string& s) {
  std::istringstream is(normalize_answer_text(s));
  std::vector<std::string> toks;
  std::string t;
  while (is >> t) toks.push_back(t);
  return toks;
}

namespace {

std::optional<double> as_number(const Answer& a) {
  switch (a.kind) {
    case Answer::Kind::Number:
      return a.number;
    case Answer::Kind::Count:
      return static_cast<double>(a.count);
    case Answer::Kind::Spans: {
      if (a.spans.size() != 1) return std::nullopt;
      std::string norm = normalize_answer_text(a.spans[0]);
      if (norm.empty()) return std::nullopt;
      char* end = nullptr;
      double v = std::strtod(norm.c_str(), &end);
      if (end != norm.c_str() + norm.size()) return std::nullopt;
      return v;
    }
    case Answer::Kind::Date:
      return std::nullopt;
  }
  return std::nullopt;
}

double bag_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
  std::map<std::string, int> gold_counts;
  for (const auto& t : gold) ++gold_counts[t];
  int common = 0;
  for (const auto& t : pred) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      ++common;
      --it->second;
    }
  }
  if (common == 0) return 0.0;
  double precision = static_cast<double>(common) / pred.size();
  double recall = static_cast<double>(common) / gold.size();
  return 2.0 * precision * recall / (precision + recall);
}

bool dates_equal(const Answer& a, const Answer& b) {
  return a.day == b.day && a.month == b.month && a.year == b.year;
}

}  // namespace

MetricPair drop_metrics(const Answer& predicted, const Answer& gold) {
  auto pn = as_number(predicted);
  auto gn = as_number(gold);
  if (pn && gn) {
    int em = std::fabs(*pn - *gn) < 1e-9 ? 1 : 0;
    return {static_cast<double>(em), em};
  }
  if (predicted.kind == Answer::Kind::Date && gold.kind == Answer::Kind::Date) {
    int em = dates_equal(predicted, gold) ? 1 : 0;
    return {static_cast<double>(em), em};
  }
  if (predicted.kind == Answer::Kind::Spans && gold.kind == Answer::Kind::Spans) {
    const std::string& pred_text = predicted.spans.empty() ? "" : predicted.spans[0];
    std::vector<std::string> pred_toks = normalize_answer_tokens(pred_text);
    std::string pred_norm = normalize_answer_text(pred_text);
    double best_f1 = 0.0;
    int em = 0;
    for (const auto& g : gold.spans) {
      best_f1 = std::max(best_f1, bag_f1(pred_toks, normalize_answer_tokens(g)));
      if (pred_norm == normalize_answer_text(g)) em = 1;
    }
    if (em) best_f1 = 1.0;
    return {best_f1, em};
  }
  // mixed kinds: fall back to normalized display strings
  std::string p = normalize_answer_text(predicted.to_display());
  std::string g = normalize_answer_text(gold.to_display());
  int em = (!p.empty() && p == g) ? 1 : 0;
  double f1 =
      em ? 1.0 : bag_f1(normalize_answer_tokens(predicted.to_display()),
                        normalize_answer_tokens(gold.to_display()));
  return {f1, em};
}

}  // namespace nmn
