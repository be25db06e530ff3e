#pragma once

#include <map>
#include <string>
#include <vector>

#include "nmn/rng.hpp"
#include "nmn/tensor.hpp"
#include "nmn/text.hpp"

namespace nmn {

struct EncoderConfig {
  int d = 64;      // model width, shared with every bilinear parameter
  int layers = 2;  // self-attention layers
  double dropout = 0.0;
  bool use_positions = true;
};

class Vocabulary {
 public:
  Vocabulary();
  // Sorted unique tokens from all questions and passages; id 0 is <unk>.
  static Vocabulary build(const std::vector<DatasetRecord>& records);
  static Vocabulary from_words(std::vector<std::string> words);

  int id_of(const std::string& token) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

// Everything a forward pass needs: encoder + module parameters and the vocab.
struct Model {
  EncoderConfig config;
  Vocabulary vocab;
  ParamStore params;
};

// Fresh model with deterministically seeded parameters.
Model make_model(const Vocabulary& vocab, const EncoderConfig& config, uint64_t seed);

// Expected parameter shapes for a given vocab/config; checkpoint loading
// validates against this manifest.
std::map<std::string, std::pair<int, int>> param_manifest(int vocab_size,
                                                          const EncoderConfig& config);

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

struct EncodedPair {
  Tape::Var question;   // n_q x d
  Tape::Var paragraph;  // m x d
};

// Contextual token representations for both sequences. Deterministic given
// (inputs, params); dropout is applied only when a non-null rng is supplied
// and config.dropout > 0 (training mode).
EncodedPair encode_pair(Tape& tape, const Model& model, const std::vector<Token>& q_tokens,
                        const std::vector<Token>& p_tokens, Rng* dropout_rng = nullptr);

// Uniform attention over [begin, end); zero elsewhere.
Tensor2 question_span_attention(int begin, int end, int n_q);

// tokenize + number annotation + Table 3 length cap, for question text.
std::vector<Token> build_question_tokens(const std::string& question);

}  // namespace nmn
