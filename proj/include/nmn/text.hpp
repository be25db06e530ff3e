#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nmn/errors.hpp"

namespace nmn {

// Table 3 input limits; longer inputs are truncated with a warning.
inline constexpr int kMaxQuestionTokens = 50;
inline constexpr int kMaxParagraphTokens = 459;

enum class DatePartKind { Day, Month, Year };

struct Token {
  std::string text;
  int begin = 0;  // char offsets into the source text
  int end = 0;
  int sentence_id = -1;
  std::optional<double> number_value;
  std::optional<DatePartKind> date_part;
};

struct NumberMention {
  int token_index = 0;
  double value = 0.0;
};

struct DateGroup {
  std::vector<int> token_indices;
  std::optional<int> day;
  std::optional<int> month;  // 1..12
  std::optional<int> year;
  bool cross_sentence = false;
};

struct ParagraphIndex {
  std::string text;
  std::vector<Token> tokens;
  std::vector<std::vector<int>> sentences;  // disjoint, exhaustive token index sets
  std::vector<NumberMention> numbers;       // document order
  std::vector<DateGroup> date_groups;

  int token_count() const { return static_cast<int>(tokens.size()); }
  int number_count() const { return static_cast<int>(numbers.size()); }
  int sentence_of(int token_index) const { return tokens[token_index].sentence_id; }
  // All member tokens of all date groups, flattened in document order.
  std::vector<int> date_token_indices() const;
  // Group index for each flattened date token, aligned with date_token_indices().
  std::vector<int> date_token_groups() const;
  std::string span_text(int first_token, int last_token) const;
};

struct Answer {
  enum class Kind { Number, Date, Spans, Count };
  Kind kind = Kind::Number;
  double number = 0.0;
  std::optional<int> day, month, year;
  std::vector<std::string> spans;
  int count = 0;

  static Answer make_number(double v);
  static Answer make_date(std::optional<int> d, std::optional<int> m, std::optional<int> y);
  static Answer make_spans(std::vector<std::string> s);
  static Answer make_count(int c);
  std::string to_display() const;
};

struct DatasetRecord {
  std::string passage_id;
  std::string query_id;
  std::string question;
  std::string passage;
  std::optional<std::string> program;
  std::optional<std::string> type;  // question type, when the producer knows it
  Answer answer;
};

std::vector<Token> tokenize(const std::string& text);
// Assigns sentence ids in place and returns the index sets.
std::vector<std::vector<int>> segment_sentences(std::vector<Token>& tokens);
std::vector<NumberMention> extract_numbers(const std::vector<Token>& tokens);
std::vector<DateGroup> extract_dates(const std::vector<Token>& tokens);

// tokenize + segment + number/date extraction, with the Table 3 length cap.
ParagraphIndex build_paragraph_index(const std::string& text,
                                     int max_tokens = kMaxParagraphTokens);

std::vector<DatasetRecord> load_dataset(const std::string& path);
void save_dataset(const std::vector<DatasetRecord>& records, const std::string& path);

}  // namespace nmn
