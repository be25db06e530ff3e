#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nmn/encoder.hpp"
#include "nmn/interpreter.hpp"
#include "nmn/modules.hpp"
#include "nmn/text.hpp"

namespace nmn {

struct TrainConfig {
  std::string profile = "toy";
  int batch_size = 16;
  int epochs = 20;
  double lr = 1e-3;
  double dropout = 0.0;
  uint64_t seed = 17;
  double aux_weight = 1.0;
  VariantConfig variant;
  EncoderConfig encoder;

  // "paper" pins batch 4 / epochs 40 / lr 1e-5 / dropout 0.2;
  // "toy" defaults batch 16 / epochs 20 / lr 1e-3 / no dropout.
  static TrainConfig for_profile(const std::string& name);
};

struct TrainResult {
  Model model;
  std::vector<double> epoch_loss;  // mean combined loss per epoch
  std::vector<double> epoch_nll;
  std::vector<double> epoch_aux;
  bool aborted = false;            // non-finite loss; model holds the last good state
  std::string abort_example;
};

TrainResult train(const std::vector<DatasetRecord>& records, const TrainConfig& cfg);

struct TypeScore {
  int count = 0;
  int errors = 0;
  double f1_sum = 0.0;
  double em_sum = 0.0;
  double f1() const { return count ? 100.0 * f1_sum / count : 0.0; }
  double em() const { return count ? 100.0 * em_sum / count : 0.0; }
};

struct EvalReport {
  int total = 0;
  int errors = 0;  // execution failures, scored as wrong
  double overall_f1 = 0.0;  // percentages
  double overall_em = 0.0;
  std::map<std::string, TypeScore> per_type;
  std::vector<double> record_f1;  // per record, in [0, 1]
  std::vector<double> record_em;

  std::string to_table() const;
  std::string to_json_string() const;
};

// Aggregation seam shared by evaluate() and the metric tests: one
// (prediction, gold, type, error) row per record.
struct ScoredPrediction {
  Answer predicted;
  Answer gold;
  std::string type;
  bool error = false;
};
EvalReport score_predictions(const std::vector<ScoredPrediction>& rows);

EvalReport evaluate(const std::vector<DatasetRecord>& records, const Model& model,
                    const VariantConfig& cfg);

// Question type from the gold program shape (fallback when records carry none).
std::string classify_program(const std::string& program_text);

struct AblationRow {
  std::string variant;
  uint64_t seed = 0;
  double f1 = 0.0;
  double em = 0.0;
  std::map<std::string, TypeScore> per_type;
  double train_seconds = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::vector<std::string> notes;  // flagged expected-ordering violations
  double mean_f1(const std::string& variant) const;
  double mean_em(const std::string& variant) const;
  std::string to_table() const;
  std::string to_json_string() const;
};

const std::vector<std::string>& ablation_variants();

AblationReport ablate(const std::vector<DatasetRecord>& train_data,
                      const std::vector<DatasetRecord>& test_data, const TrainConfig& base,
                      const std::vector<uint64_t>& seeds, int jobs = 1);

// Two-sided sign-flip permutation test on per-example score differences.
double paired_permutation_test(const std::vector<double>& a, const std::vector<double>& b,
                               int iterations, uint64_t seed);

}  // namespace nmn
