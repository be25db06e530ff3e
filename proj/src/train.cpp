#include "nmn/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <functional>
#include <thread>

#include "nmn/log.hpp"
#include "nmn/metrics.hpp"
#include "nmn/rng.hpp"
#include "json.hpp"

namespace nmn {

TrainConfig TrainConfig::for_profile(const std::string& name) {
  TrainConfig cfg;
  cfg.profile = name;
  if (name == "paper") {
    cfg.batch_size = 4;
    cfg.epochs = 40;
    cfg.lr = 1e-5;
    cfg.dropout = 0.2;
  } else if (name == "toy") {
    cfg.batch_size = 16;
    cfg.epochs = 20;
    cfg.lr = 1e-3;
    cfg.dropout = 0.0;
  } else {
    throw contract_error("unknown training profile '" + name + "'");
  }
  return cfg;
}

namespace {

struct PreppedExample {
  const DatasetRecord* rec = nullptr;
  std::vector<Token> q_tokens;
  ParagraphIndex pidx;
  Program program;
};

PreppedExample prep_example(const DatasetRecord& rec) {
  if (!rec.program)
    throw contract_error("train: record '" + rec.query_id + "' carries no program");
  PreppedExample ex;
  ex.rec = &rec;
  ex.q_tokens = build_question_tokens(rec.question);
  ex.program = parse_program(*rec.program);
  typecheck(ex.program, static_cast<int>(ex.q_tokens.size()));
  ex.pidx = build_paragraph_index(rec.passage);
  return ex;
}

// Binary indicator over the root distribution's support marking the gold.
Tensor2 gold_indicator(const ModuleValue& root, const Answer& gold,
                       const ParagraphIndex& pidx, const Tensor2& dist) {
  Tensor2 ind(1, dist.cols, 0.0);
  switch (root.type) {
    case ValueType::NumDist:
      if (gold.kind == Answer::Kind::Number || gold.kind == Answer::Kind::Count) {
        double target = gold.kind == Answer::Kind::Number ? gold.number : gold.count;
        for (int j = 0; j < dist.cols; ++j)
          if (std::fabs(pidx.numbers[j].value - target) < 1e-6) ind.at(0, j) = 1.0;
      }
      break;
    case ValueType::YearDiffDist:
      if (gold.kind == Answer::Kind::Number)
        for (int j = 0; j < dist.cols; ++j)
          if (std::fabs(root.deltas[j] - gold.number) < 1e-6) ind.at(0, j) = 1.0;
      break;
    case ValueType::CountDist:
      if (gold.kind == Answer::Kind::Count && gold.count >= 0 && gold.count < dist.cols)
        ind.at(0, gold.count) = 1.0;
      break;
    case ValueType::DateDist:
      if (gold.kind == Answer::Kind::Date)
        for (int g = 0; g < dist.cols; ++g) {
          const DateGroup& grp = pidx.date_groups[g];
          if (grp.day == gold.day && grp.month == gold.month && grp.year == gold.year)
            ind.at(0, g) = 1.0;
        }
      break;
    case ValueType::PAtt:
    case ValueType::Span:
      if (gold.kind == Answer::Kind::Spans) {
        for (const auto& span : gold.spans) {
          std::vector<Token> toks = tokenize(span);
          if (toks.empty()) continue;
          const int w = static_cast<int>(toks.size());
          for (int start = 0; start + w <= pidx.token_count(); ++start) {
            bool match = true;
            for (int k = 0; k < w && match; ++k)
              match = pidx.tokens[start + k].text == toks[static_cast<size_t>(k)].text;
            if (match)
              for (int k = 0; k < w; ++k) ind.at(0, start + k) = 1.0;
          }
        }
      }
      break;
    case ValueType::QAtt:
      break;
  }
  return ind;
}

struct AdamState {
  std::map<std::string, Tensor2> m, v;
  int t = 0;
};

void adam_step(ParamStore& params, const std::map<std::string, Tensor2>& grads,
               AdamState& st, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++st.t;
  const double c1 = 1.0 - std::pow(b1, st.t);
  const double c2 = 1.0 - std::pow(b2, st.t);
  for (const auto& [name, g] : grads) {
    Tensor2& p = params.get(name);
    Tensor2& m = st.m.try_emplace(name, Tensor2(g.rows, g.cols, 0.0)).first->second;
    Tensor2& v = st.v.try_emplace(name, Tensor2(g.rows, g.cols, 0.0)).first->second;
    for (size_t i = 0; i < p.data.size(); ++i) {
      m.data[i] = b1 * m.data[i] + (1.0 - b1) * g.data[i];
      v.data[i] = b2 * v.data[i] + (1.0 - b2) * g.data[i] * g.data[i];
      p.data[i] -= lr * (m.data[i] / c1) / (std::sqrt(v.data[i] / c2) + eps);
    }
  }
}

}  // namespace

TrainResult train(const std::vector<DatasetRecord>& records, const TrainConfig& cfg) {
  if (records.empty()) throw contract_error("train: dataset is empty");
  cfg.variant.validate();

  std::vector<PreppedExample> examples;
  examples.reserve(records.size());
  for (const auto& r : records) examples.push_back(prep_example(r));

  EncoderConfig enc = cfg.encoder;
  enc.dropout = cfg.dropout;
  TrainResult result;
  result.model = make_model(Vocabulary::build(records), enc, cfg.seed);

  Rng order_rng(cfg.seed * 7919 + 1);
  Rng dropout_rng(cfg.seed * 104729 + 7);
  AdamState adam;
  const int n = static_cast<int>(examples.size());
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ParamStore last_good = result.model.params;
    for (int i = n - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(order_rng.bounded(i + 1))]);

    double loss_sum = 0.0, nll_sum = 0.0, aux_sum = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int batch_n = std::min(cfg.batch_size, n - start);
      std::map<std::string, Tensor2> accum;
      for (int k = 0; k < batch_n; ++k) {
        const PreppedExample& ex = examples[static_cast<size_t>(order[static_cast<size_t>(start + k)])];
        Tape tape;
        EncodedPair pair =
            encode_pair(tape, result.model, ex.q_tokens, ex.pidx.tokens,
                        cfg.dropout > 0.0 ? &dropout_rng : nullptr);
        ExecutionResult exec =
            execute_encoded(tape, ex.program, pair.question, pair.paragraph,
                            static_cast<int>(ex.q_tokens.size()), ex.pidx,
                            result.model.params, cfg.variant);
        Tensor2 ind = gold_indicator(exec.root, ex.rec->answer, ex.pidx,
                                     tape.value(exec.root.var));
        Tape::Var mass =
            tape.sum_all(tape.mul(exec.root.var, tape.input(std::move(ind), "gold")));
        Tape::Var nll = tape.scale(tape.log_clamped(mass, 1e-12), -1.0);
        Tape::Var loss = cfg.aux_weight != 0.0
                             ? tape.add(nll, tape.scale(exec.total_aux, cfg.aux_weight))
                             : nll;
        const double loss_v = tape.value(loss).at(0, 0);
        if (!std::isfinite(loss_v)) {
          result.model.params = last_good;
          result.aborted = true;
          result.abort_example = ex.rec->query_id;
          logging::error("train: non-finite loss at example '" + ex.rec->query_id +
                         "', stopping with the last good parameters");
          return result;
        }
        loss_sum += loss_v;
        nll_sum += tape.value(nll).at(0, 0);
        aux_sum += tape.value(exec.total_aux).at(0, 0);
        for (auto& [name, g] : tape.backward(loss)) {
          auto [it, fresh] = accum.try_emplace(name, g);
          if (!fresh)
            for (size_t z = 0; z < g.data.size(); ++z) it->second.data[z] += g.data[z];
        }
      }
      for (auto& [name, g] : accum)
        for (double& gv : g.data) gv /= batch_n;
      adam_step(result.model.params, accum, adam, cfg.lr);
    }
    result.epoch_loss.push_back(loss_sum / n);
    result.epoch_nll.push_back(nll_sum / n);
    result.epoch_aux.push_back(aux_sum / n);
    logging::info("epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) +
                  " loss " + std::to_string(loss_sum / n) + " (nll " +
                  std::to_string(nll_sum / n) + ", aux " + std::to_string(aux_sum / n) + ")");
  }
  return result;
}

std::string classify_program(const std::string& program_text) {
  Program p;
  try {
    p = parse_program(program_text);
  } catch (const parse_error&) {
    return "other";
  }
  bool has_compare = false;
  std::function<void(const ProgramNode&)> walk = [&](const ProgramNode& n) {
    if (n.module.rfind("compare-num", 0) == 0) has_compare = true;
    for (const auto& c : n.children) walk(*c);
  };
  walk(*p.root);
  const std::string& root = p.root->module;
  if (root == "find-num") return "extract-number";
  if (root == "count") return "count";
  if (root == "year-diff") return "date-difference";
  if (root == "span") return has_compare ? "number-compare" : "extract-argument";
  return "other";
}

EvalReport score_predictions(const std::vector<ScoredPrediction>& rows) {
  EvalReport report;
  report.total = static_cast<int>(rows.size());
  for (const auto& row : rows) {
    TypeScore& ts = report.per_type[row.type];
    ++ts.count;
    MetricPair mp = row.error ? MetricPair{0.0, 0} : drop_metrics(row.predicted, row.gold);
    ts.f1_sum += mp.f1;
    ts.em_sum += mp.em;
    if (row.error) {
      ++ts.errors;
      ++report.errors;
    }
    report.record_f1.push_back(mp.f1);
    report.record_em.push_back(mp.em);
  }
  double f1 = 0.0, em = 0.0;
  for (double v : report.record_f1) f1 += v;
  for (double v : report.record_em) em += v;
  report.overall_f1 = report.total ? 100.0 * f1 / report.total : 0.0;
  report.overall_em = report.total ? 100.0 * em / report.total : 0.0;
  return report;
}

EvalReport evaluate(const std::vector<DatasetRecord>& records, const Model& model,
                    const VariantConfig& cfg) {
  std::vector<ScoredPrediction> rows;
  rows.reserve(records.size());
  for (const auto& rec : records) {
    ScoredPrediction row;
    row.gold = rec.answer;
    row.type = rec.type ? *rec.type
                        : (rec.program ? classify_program(*rec.program) : "other");
    if (!rec.program) {
      row.error = true;
      logging::info("evaluate: record '" + rec.query_id + "' has no program, scored wrong");
    } else {
      try {
        RunOutput out = execute(*rec.program, rec.question, rec.passage, model, cfg);
        row.predicted = out.answer;
      } catch (const std::exception& e) {
        row.error = true;
        logging::info("evaluate: record '" + rec.query_id + "' failed: " + e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  return score_predictions(rows);
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-18s %7s %7s %7s %7s\n", "type", "count", "F1", "EM",
                "errors");
  os << line;
  for (const auto& [type, ts] : per_type) {
    std::snprintf(line, sizeof(line), "%-18s %7d %7.1f %7.1f %7d\n", type.c_str(), ts.count,
                  ts.f1(), ts.em(), ts.errors);
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-18s %7d %7.1f %7.1f %7d\n", "overall", total,
                overall_f1, overall_em, errors);
  os << line;
  return os.str();
}

std::string EvalReport::to_json_string() const {
  nlohmann::json j;
  j["total"] = total;
  j["errors"] = errors;
  j["overall_f1"] = overall_f1;
  j["overall_em"] = overall_em;
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [type, ts] : per_type)
    types[type] = {{"count", ts.count}, {"f1", ts.f1()}, {"em", ts.em()},
                   {"errors", ts.errors}};
  j["per_type"] = std::move(types);
  return j.dump(2);
}

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v = {"original", "qai", "qai+nepc", "full"};
  return v;
}

double AblationReport::mean_f1(const std::string& variant) const {
  double s = 0.0;
  int c = 0;
  for (const auto& r : rows)
    if (r.variant == variant) {
      s += r.f1;
      ++c;
    }
  return c ? s / c : 0.0;
}

double AblationReport::mean_em(const std::string& variant) const {
  double s = 0.0;
  int c = 0;
  for (const auto& r : rows)
    if (r.variant == variant) {
      s += r.em;
      ++c;
    }
  return c ? s / c : 0.0;
}

std::string AblationReport::to_table() const {
  std::ostringstream os;
  char line[200];
  std::snprintf(line, sizeof(line), "%-12s %10s %10s   %s\n", "variant", "F1(mean)",
                "EM(mean)", "per-seed EM");
  os << line;
  for (const auto& variant : ablation_variants()) {
    std::string per_seed;
    for (const auto& r : rows)
      if (r.variant == variant) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%.1f", per_seed.empty() ? "" : " ", r.em);
        per_seed += buf;
      }
    if (per_seed.empty()) continue;
    std::snprintf(line, sizeof(line), "%-12s %10.1f %10.1f   %s\n", variant.c_str(),
                  mean_f1(variant), mean_em(variant), per_seed.c_str());
    os << line;
  }
  for (const auto& note : notes) os << "note: " << note << "\n";
  return os.str();
}

std::string AblationReport::to_json_string() const {
  nlohmann::json j;
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json rj;
    rj["variant"] = r.variant;
    rj["seed"] = r.seed;
    rj["f1"] = r.f1;
    rj["em"] = r.em;
    rj["train_seconds"] = r.train_seconds;
    nlohmann::json types = nlohmann::json::object();
    for (const auto& [type, ts] : r.per_type)
      types[type] = {{"count", ts.count}, {"f1", ts.f1()}, {"em", ts.em()}};
    rj["per_type"] = std::move(types);
    rows_json.push_back(std::move(rj));
  }
  j["rows"] = std::move(rows_json);
  nlohmann::json means = nlohmann::json::object();
  for (const auto& v : ablation_variants())
    means[v] = {{"f1", mean_f1(v)}, {"em", mean_em(v)}};
  j["means"] = std::move(means);
  j["notes"] = notes;
  return j.dump(2);
}

AblationReport ablate(const std::vector<DatasetRecord>& train_data,
                      const std::vector<DatasetRecord>& test_data, const TrainConfig& base,
                      const std::vector<uint64_t>& seeds, int jobs) {
  if (seeds.empty()) throw contract_error("ablate: at least one seed is required");
  struct Task {
    std::string variant;
    uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& v : ablation_variants())
    for (uint64_t s : seeds) tasks.push_back({v, s});

  AblationReport report;
  report.rows.resize(tasks.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      TrainConfig cfg = base;
      cfg.variant = VariantConfig::by_name(tasks[i].variant);
      cfg.variant.lambda = base.variant.lambda;
      cfg.variant.window = base.variant.window;
      cfg.variant.mask_mode = base.variant.mask_mode;
      cfg.seed = tasks[i].seed;
      auto t0 = std::chrono::steady_clock::now();
      TrainResult tr = train(train_data, cfg);
      auto t1 = std::chrono::steady_clock::now();
      EvalReport ev = evaluate(test_data, tr.model, cfg.variant);
      AblationRow row;
      row.variant = tasks[i].variant;
      row.seed = tasks[i].seed;
      row.f1 = ev.overall_f1;
      row.em = ev.overall_em;
      row.per_type = ev.per_type;
      row.train_seconds = std::chrono::duration<double>(t1 - t0).count();
      report.rows[i] = std::move(row);
      logging::info("ablate: " + tasks[i].variant + " seed " + std::to_string(tasks[i].seed) +
                    " em " + std::to_string(ev.overall_em));
    }
  };
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  const auto& order = ablation_variants();
  for (size_t i = 1; i < order.size(); ++i) {
    double prev = report.mean_em(order[i - 1]);
    double cur = report.mean_em(order[i]);
    if (cur < prev - 2.0) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "expected ordering violated by >2 EM points: %s (%.1f) < %s (%.1f)",
                    order[i].c_str(), cur, order[i - 1].c_str(), prev);
      report.notes.push_back(buf);
    }
  }
  return report;
}

double paired_permutation_test(const std::vector<double>& a, const std::vector<double>& b,
                               int iterations, uint64_t seed) {
  if (a.size() != b.size())
    throw contract_error("paired_permutation_test: score vectors differ in length");
  if (a.empty()) throw contract_error("paired_permutation_test: empty score vectors");
  if (iterations < 1) throw contract_error("paired_permutation_test: iterations must be >= 1");
  const size_t n = a.size();
  std::vector<double> diff(n);
  for (size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  double observed = 0.0;
  for (double d : diff) observed += d;
  observed = std::fabs(observed / n);

  Rng rng(seed);
  int at_least = 0;
  for (int it = 0; it < iterations; ++it) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += rng.chance(0.5) ? diff[i] : -diff[i];
    if (std::fabs(sum / n) >= observed - 1e-12) ++at_least;
  }
  return static_cast<double>(at_least + 1) / (iterations + 1);
}

}  // namespace nmn
