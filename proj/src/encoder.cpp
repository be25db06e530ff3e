#include "nmn/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "nmn/log.hpp"
#include "json.hpp"

namespace nmn {

Vocabulary::Vocabulary() {
  words_ = {"<unk>"};
  index_["<unk>"] = 0;
}

Vocabulary Vocabulary::build(const std::vector<DatasetRecord>& records) {
  std::set<std::string> seen;
  for (const auto& r : records) {
    for (const auto& t : tokenize(r.question)) seen.insert(t.text);
    for (const auto& t : tokenize(r.passage)) seen.insert(t.text);
  }
  std::vector<std::string> words(seen.begin(), seen.end());
  return from_words(std::move(words));
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  Vocabulary v;
  for (auto& w : words) {
    if (v.index_.count(w)) continue;
    v.index_[w] = static_cast<int>(v.words_.size());
    v.words_.push_back(w);
  }
  return v;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

std::map<std::string, std::pair<int, int>> param_manifest(int vocab_size,
                                                          const EncoderConfig& config) {
  std::map<std::string, std::pair<int, int>> m;
  const int d = config.d;
  m["emb"] = {vocab_size, d};
  m["num_feat"] = {1, d};
  for (int l = 0; l < config.layers; ++l) {
    std::string p = "enc.l" + std::to_string(l) + ".";
    m[p + "wq"] = {d, d};
    m[p + "wk"] = {d, d};
    m[p + "wv"] = {d, d};
    m[p + "wo"] = {d, d};
  }
  for (const char* name : {"mod.find.w", "mod.filter.w", "mod.relocate.w", "mod.num.w",
                           "mod.date.w"})
    m[name] = {d, d};
  m["mod.count.a"] = {1, 1};
  m["mod.count.b"] = {1, 1};
  m["mod.count.sigma"] = {1, 1};
  return m;
}

namespace {

Tensor2 random_tensor(int rows, int cols, double stddev, Rng& rng) {
  Tensor2 t(rows, cols);
  for (double& v : t.data) v = stddev * rng.normal();
  return t;
}

// Bilinear matrices start near a scaled identity so token-identity matching
// works before any training.
Tensor2 near_identity(int d, double diag, double noise, Rng& rng) {
  Tensor2 t = random_tensor(d, d, noise, rng);
  for (int i = 0; i < d; ++i) t.at(i, i) += diag;
  return t;
}

Tensor2 sinusoidal_positions(int len, int d) {
  Tensor2 pos(len, d);
  for (int t = 0; t < len; ++t)
    for (int k = 0; k < d; ++k) {
      double rate = std::pow(10000.0, -2.0 * (k / 2) / d);
      pos.at(t, k) = (k % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
    }
  return pos;
}

}  // namespace

Model make_model(const Vocabulary& vocab, const EncoderConfig& config, uint64_t seed) {
  Model model;
  model.config = config;
  model.vocab = vocab;
  Rng rng(seed);
  const int d = config.d;
  const double w_std = 1.0 / std::sqrt(static_cast<double>(d));
  model.params.set("emb", random_tensor(vocab.size(), d, 0.3, rng));
  model.params.set("num_feat", random_tensor(1, d, 0.3, rng));
  for (int l = 0; l < config.layers; ++l) {
    std::string p = "enc.l" + std::to_string(l) + ".";
    model.params.set(p + "wq", random_tensor(d, d, w_std, rng));
    model.params.set(p + "wk", random_tensor(d, d, w_std, rng));
    model.params.set(p + "wv", random_tensor(d, d, w_std, rng));
    model.params.set(p + "wo", random_tensor(d, d, w_std, rng));
  }
  model.params.set("mod.find.w", near_identity(d, 1.0, 0.02, rng));
  model.params.set("mod.filter.w", near_identity(d, 0.5, 0.02, rng));
  model.params.set("mod.relocate.w", near_identity(d, 0.5, 0.02, rng));
  model.params.set("mod.num.w", near_identity(d, 1.0, 0.02, rng));
  model.params.set("mod.date.w", near_identity(d, 1.0, 0.02, rng));
  model.params.set("mod.count.a", Tensor2(1, 1, 1.0));
  model.params.set("mod.count.b", Tensor2(1, 1, -3.0));
  model.params.set("mod.count.sigma", Tensor2(1, 1, 1.0));
  return model;
}

void save_checkpoint(const Model& model, const std::string& path) {
  nlohmann::json j;
  j["version"] = 1;
  j["config"] = {{"d", model.config.d},
                 {"layers", model.config.layers},
                 {"dropout", model.config.dropout},
                 {"use_positions", model.config.use_positions}};
  j["vocab"] = model.vocab.words();
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : model.params.values()) {
    params[name] = {{"rows", t.rows}, {"cols", t.cols}, {"data", t.data}};
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw data_error("save_checkpoint: cannot open '" + path + "' for writing");
  out << j.dump() << "\n";
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("load_checkpoint: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw data_error("load_checkpoint: " + std::string(e.what()));
  }
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw data_error("load_checkpoint: unsupported checkpoint version");
  Model model;
  const auto& c = j.at("config");
  model.config.d = c.at("d").get<int>();
  model.config.layers = c.at("layers").get<int>();
  model.config.dropout = c.at("dropout").get<double>();
  model.config.use_positions = c.at("use_positions").get<bool>();
  std::vector<std::string> words = j.at("vocab").get<std::vector<std::string>>();
  // words were saved in id order with <unk> first
  Vocabulary v;
  if (words.empty() || words[0] != "<unk>")
    throw data_error("load_checkpoint: vocab must start with <unk>");
  v = Vocabulary::from_words({words.begin() + 1, words.end()});
  model.vocab = v;

  auto manifest = param_manifest(model.vocab.size(), model.config);
  for (const auto& [name, shape] : manifest) {
    if (!j.at("params").contains(name))
      throw data_error("load_checkpoint: missing parameter '" + name + "'");
    const auto& pj = j["params"][name];
    Tensor2 t(pj.at("rows").get<int>(), pj.at("cols").get<int>());
    if (t.rows != shape.first || t.cols != shape.second)
      throw data_error("load_checkpoint: parameter '" + name + "' has shape " +
                       t.shape_str() + ", expected " + std::to_string(shape.first) + "x" +
                       std::to_string(shape.second));
    t.data = pj.at("data").get<std::vector<double>>();
    if (t.data.size() != static_cast<size_t>(t.rows) * t.cols)
      throw data_error("load_checkpoint: parameter '" + name + "' data length mismatch");
    model.params.set(name, std::move(t));
  }
  return model;
}

namespace {

Tape::Var encode_sequence(Tape& tape, const Model& model, const std::vector<Token>& tokens,
                          Rng* dropout_rng) {
  const int len = static_cast<int>(tokens.size());
  const int d = model.config.d;
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(model.vocab.id_of(t.text));

  Tape::Var emb = tape.param("emb", model.params);
  Tape::Var x = tape.gather_rows(emb, ids);
  if (model.config.use_positions)
    x = tape.add(x, tape.input(sinusoidal_positions(len, d), "positions"));

  Tensor2 num_ind(len, 1, 0.0);
  for (int i = 0; i < len; ++i)
    if (tokens[i].number_value) num_ind.at(i, 0) = 1.0;
  x = tape.add(x, tape.matmul(tape.input(std::move(num_ind), "is-number"),
                              tape.param("num_feat", model.params)));

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (int l = 0; l < model.config.layers; ++l) {
    std::string p = "enc.l" + std::to_string(l) + ".";
    Tape::Var q = tape.matmul(x, tape.param(p + "wq", model.params));
    Tape::Var k = tape.matmul(x, tape.param(p + "wk", model.params));
    Tape::Var v = tape.matmul(x, tape.param(p + "wv", model.params));
    Tape::Var scores = tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_d);
    Tape::Var att = tape.row_softmax(scores);
    Tape::Var ctx = tape.matmul(att, v);
    x = tape.tanh(tape.add(tape.matmul(ctx, tape.param(p + "wo", model.params)), x));
    if (dropout_rng != nullptr && model.config.dropout > 0.0) {
      Tensor2 mask(len, d);
      const double keep = 1.0 - model.config.dropout;
      for (double& mv : mask.data) mv = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
      x = tape.mul(x, tape.input(std::move(mask), "dropout"));
    }
  }
  return x;
}

}  // namespace

EncodedPair encode_pair(Tape& tape, const Model& model, const std::vector<Token>& q_tokens,
                        const std::vector<Token>& p_tokens, Rng* dropout_rng) {
  if (q_tokens.empty()) throw contract_error("encode_pair: empty question");
  if (p_tokens.empty()) throw contract_error("encode_pair: empty paragraph");
  EncodedPair out;
  out.question = encode_sequence(tape, model, q_tokens, dropout_rng);
  out.paragraph = encode_sequence(tape, model, p_tokens, dropout_rng);
  return out;
}

Tensor2 question_span_attention(int begin, int end, int n_q) {
  if (begin < 0 || begin >= end || end > n_q)
    throw contract_error("question_span_attention: span [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for a " + std::to_string(n_q) +
                         "-token question");
  Tensor2 att(1, n_q, 0.0);
  const double mass = 1.0 / (end - begin);
  for (int i = begin; i < end; ++i) att.at(0, i) = mass;
  return att;
}

std::vector<Token> build_question_tokens(const std::string& question) {
  std::vector<Token> tokens = tokenize(question);
  if (static_cast<int>(tokens.size()) > kMaxQuestionTokens) {
    logging::info("question truncated to " + std::to_string(kMaxQuestionTokens) + " tokens");
    tokens.resize(kMaxQuestionTokens);
  }
  for (const auto& nm : extract_numbers(tokens)) tokens[nm.token_index].number_value = nm.value;
  return tokens;
}

}  // namespace nmn
