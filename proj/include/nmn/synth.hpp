#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmn/text.hpp"

namespace nmn {

// Question-type percentages for generated data (test-set distribution).
struct SynthMix {
  double date_compare = 18.6;
  double date_difference = 17.9;
  double number_compare = 19.3;
  double extract_number = 13.5;
  double count = 17.6;
  double extract_argument = 12.8;

  double total() const;
  // exact per-type allocation of n records (largest remainder)
  std::vector<int> allocate(int n) const;
};

const std::vector<std::string>& synth_type_names();

// Deterministic synthetic QA records with gold programs and answers.
// Every gold answer is produced by discrete_execute and re-checked against
// the template plan at generation time.
std::vector<DatasetRecord> synth_generate(int n, uint64_t seed, const SynthMix& mix = {});

// Discrete reference semantics: lexical matching for find, same-sentence
// lookup for numbers/dates, set cardinality for count. Used to compute gold
// answers; independent of the differentiable execution path.
Answer discrete_execute(const std::string& program_text, const std::string& question,
                        const std::string& passage);

}  // namespace nmn
