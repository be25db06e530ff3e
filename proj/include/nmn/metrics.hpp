#pragma once

#include <string>
#include <vector>

#include "nmn/text.hpp"

namespace nmn {

// Lowercases, strips punctuation and the articles a/an/the, collapses spaces.
std::string normalize_answer_text(const std::string& s);
std::vector<std::string> normalize_answer_tokens(const std::string& s);

struct MetricPair {
  double f1 = 0.0;  // in [0, 1]
  int em = 0;       // 0 or 1
};

// DROP-style scoring: numeric answers compare numerically, dates compare
// componentwise, spans use token-bag F1 (max over gold spans).
MetricPair drop_metrics(const Answer& predicted, const Answer& gold);

}  // namespace nmn
