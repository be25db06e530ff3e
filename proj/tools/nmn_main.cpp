#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nmn/encoder.hpp"
#include "nmn/interpreter.hpp"
#include "nmn/log.hpp"
#include "nmn/metrics.hpp"
#include "nmn/program.hpp"
#include "nmn/synth.hpp"
#include "nmn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct VariantFlags {
  std::string variant = "original";
  std::string mask_mode = "neg-inf";
  double lambda = 0.5;
  int window = 10;
  std::string aux;  // empty keeps the variant's own mode

  void attach(CLI::App* cmd) {
    cmd->add_option("--variant", variant, "Model variant: original, qai, qai+nepc, full")
        ->check(CLI::IsMember({"original", "qai", "qai+nepc", "full"}));
    cmd->add_option("--mask-mode", mask_mode,
                    "Same-sentence constraint semantics: neg-inf excludes masked scores, "
                    "literal multiplies them by the relation matrix")
        ->check(CLI::IsMember({"neg-inf", "literal"}));
    cmd->add_option("--lambda", lambda, "Paragraph weight in the question-aware mix");
    cmd->add_option("--window", window, "Window half-width for the windowed auxiliary loss");
    cmd->add_option("--aux", aux, "Auxiliary loss mode override: window or sentence")
        ->check(CLI::IsMember({"window", "sentence"}));
  }

  nmn::VariantConfig resolve() const {
    nmn::VariantConfig cfg = nmn::VariantConfig::by_name(variant);
    cfg.mask_mode = mask_mode == "literal" ? nmn::MaskMode::Literal : nmn::MaskMode::NegInf;
    cfg.lambda = lambda;
    cfg.window = window;
    if (aux == "window") cfg.aux_mode = nmn::AuxMode::Window;
    if (aux == "sentence") cfg.aux_mode = nmn::AuxMode::Sentence;
    cfg.validate();
    return cfg;
  }

  json echo() const {
    return json{{"variant", variant}, {"mask_mode", mask_mode}, {"lambda", lambda},
                {"window", window},   {"aux", aux.empty() ? "(variant default)" : aux}};
  }
};

void echo_config(const std::string& sub, const json& resolved) {
  std::cerr << "config " << sub << ": " << resolved.dump() << "\n";
}

std::vector<double> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw nmn::data_error("cannot open scores file '" + path + "'");
  std::vector<double> scores;
  double v;
  while (in >> v) scores.push_back(v);
  if (scores.empty()) throw nmn::data_error("scores file '" + path + "' holds no numbers");
  return scores;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw nmn::data_error("cannot open '" + path + "' for writing");
  out << content;
}

nmn::SynthMix parse_mix(const std::string& spec) {
  nmn::SynthMix mix;
  if (spec.empty()) return mix;
  std::istringstream is(spec);
  std::string item;
  while (std::getline(is, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw nmn::contract_error("bad --mix entry '" + item + "', expected type=percent");
    std::string key = item.substr(0, eq);
    double value = std::stod(item.substr(eq + 1));
    if (key == "date-compare") mix.date_compare = value;
    else if (key == "date-difference") mix.date_difference = value;
    else if (key == "number-compare") mix.number_compare = value;
    else if (key == "extract-number") mix.extract_number = value;
    else if (key == "count") mix.count = value;
    else if (key == "extract-argument") mix.extract_argument = value;
    else throw nmn::contract_error("unknown question type '" + key + "' in --mix");
  }
  return mix;
}

int cmd_ingest(const std::string& data_path) {
  auto records = nmn::load_dataset(data_path);
  echo_config("ingest", json{{"data", data_path}});
  json stats;
  stats["records"] = records.size();
  long tokens = 0, sentences = 0, numbers = 0, dates = 0;
  std::map<std::string, int> kinds;
  std::set<std::string> passages;
  for (const auto& r : records) {
    passages.insert(r.passage_id);
    nmn::ParagraphIndex pidx = nmn::build_paragraph_index(r.passage);
    tokens += pidx.token_count();
    sentences += pidx.sentences.size();
    numbers += pidx.number_count();
    dates += pidx.date_groups.size();
    switch (r.answer.kind) {
      case nmn::Answer::Kind::Number: ++kinds["number"]; break;
      case nmn::Answer::Kind::Date: ++kinds["date"]; break;
      case nmn::Answer::Kind::Spans: ++kinds["spans"]; break;
      case nmn::Answer::Kind::Count: ++kinds["count"]; break;
    }
  }
  stats["passages"] = passages.size();
  stats["paragraph_tokens"] = tokens;
  stats["paragraph_sentences"] = sentences;
  stats["paragraph_numbers"] = numbers;
  stats["paragraph_date_groups"] = dates;
  stats["answer_kinds"] = kinds;
  std::cout << stats.dump(2) << "\n";
  return 0;
}

struct ModelFlags {
  std::string ckpt;
  int d = 64;
  int layers = 2;
  uint64_t seed = 17;

  void attach(CLI::App* cmd, bool with_ckpt = true) {
    if (with_ckpt)
      cmd->add_option("--ckpt", ckpt, "Parameter checkpoint to load (JSON)");
    cmd->add_option("--d", d, "Encoder width for freshly seeded parameters");
    cmd->add_option("--layers", layers, "Encoder self-attention layers");
    cmd->add_option("--seed", seed, "Seed for parameter init and any sampling");
  }

  nmn::Model load_or_init(const std::vector<nmn::DatasetRecord>& records) const {
    if (!ckpt.empty()) return nmn::load_checkpoint(ckpt);
    nmn::EncoderConfig enc;
    enc.d = d;
    enc.layers = layers;
    return nmn::make_model(nmn::Vocabulary::build(records), enc, seed);
  }
};

int cmd_run(const std::string& data_path, const std::string& program_text,
            const VariantFlags& vf, const ModelFlags& mf, const std::string& dump_dir,
            const std::string& format, int limit) {
  auto records = nmn::load_dataset(data_path);
  if (limit > 0 && static_cast<int>(records.size()) > limit) records.resize(limit);
  nmn::Model model = mf.load_or_init(records);
  nmn::VariantConfig cfg = vf.resolve();
  echo_config("run", json{{"data", data_path},
                          {"program", program_text.empty() ? "(per record)" : program_text},
                          {"ckpt", mf.ckpt.empty() ? "(fresh)" : mf.ckpt},
                          {"seed", mf.seed},
                          {"dump", dump_dir},
                          {"format", format},
                          {"variant", vf.echo()}});
  if (!dump_dir.empty()) fs::create_directories(dump_dir);

  int errors = 0;
  double f1 = 0.0, em = 0.0;
  for (const auto& rec : records) {
    json line;
    line["query_id"] = rec.query_id;
    std::string prog = !program_text.empty()
                           ? program_text
                           : rec.program ? *rec.program : std::string();
    if (prog.empty()) throw nmn::data_error("record '" + rec.query_id + "' has no program");
    try {
      nmn::RunOutput out = nmn::execute(prog, rec.question, rec.passage, model, cfg);
      nmn::MetricPair mp = nmn::drop_metrics(out.answer, rec.answer);
      line["predicted"] = out.answer.to_display();
      line["gold"] = rec.answer.to_display();
      line["f1"] = mp.f1;
      line["em"] = mp.em;
      f1 += mp.f1;
      em += mp.em;
      if (!dump_dir.empty()) {
        bool csv = format == "csv";
        std::string path = dump_dir + "/trace_" + rec.query_id + (csv ? ".csv" : ".json");
        write_text(path, nmn::dump_trace(out.trace,
                                         csv ? nmn::TraceFormat::Csv : nmn::TraceFormat::Json));
      }
    } catch (const std::exception& e) {
      line["error"] = e.what();
      ++errors;
    }
    std::cout << line.dump() << "\n";
  }
  json summary;
  summary["records"] = records.size();
  summary["errors"] = errors;
  summary["overall_f1"] = records.empty() ? 0.0 : 100.0 * f1 / records.size();
  summary["overall_em"] = records.empty() ? 0.0 : 100.0 * em / records.size();
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_synth(int n, uint64_t seed, const std::string& out_path, const std::string& mix_spec) {
  nmn::SynthMix mix = parse_mix(mix_spec);
  echo_config("synth", json{{"n", n}, {"seed", seed}, {"out", out_path},
                            {"mix", mix_spec.empty() ? "(default)" : mix_spec}});
  auto records = nmn::synth_generate(n, seed, mix);
  nmn::save_dataset(records, out_path);
  std::map<std::string, int> by_type;
  for (const auto& r : records) ++by_type[r.type.value_or("?")];
  json stats;
  stats["records"] = records.size();
  stats["by_type"] = by_type;
  std::cout << stats.dump(2) << "\n";
  return 0;
}

struct TrainFlags {
  std::string profile = "toy";
  int epochs = 0;     // 0 keeps the profile default
  int batch = 0;
  double lr = 0.0;
  double dropout = -1.0;
  double aux_weight = 1.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--profile", profile, "Hyper-parameter profile: paper or toy")
        ->check(CLI::IsMember({"paper", "toy"}));
    cmd->add_option("--epochs", epochs, "Override the profile's epoch count");
    cmd->add_option("--batch", batch, "Override the profile's batch size");
    cmd->add_option("--lr", lr, "Override the profile's learning rate");
    cmd->add_option("--dropout", dropout, "Override the profile's dropout rate");
    cmd->add_option("--aux-weight", aux_weight, "Weight of the auxiliary loss term");
  }

  nmn::TrainConfig resolve(const VariantFlags& vf, const ModelFlags& mf) const {
    nmn::TrainConfig cfg = nmn::TrainConfig::for_profile(profile);
    if (epochs > 0) cfg.epochs = epochs;
    if (batch > 0) cfg.batch_size = batch;
    if (lr > 0.0) cfg.lr = lr;
    if (dropout >= 0.0) cfg.dropout = dropout;
    cfg.aux_weight = aux_weight;
    cfg.seed = mf.seed;
    cfg.encoder.d = mf.d;
    cfg.encoder.layers = mf.layers;
    cfg.variant = vf.resolve();
    return cfg;
  }

  json echo(const nmn::TrainConfig& cfg) const {
    return json{{"profile", cfg.profile}, {"epochs", cfg.epochs},
                {"batch", cfg.batch_size}, {"lr", cfg.lr}, {"dropout", cfg.dropout},
                {"aux_weight", cfg.aux_weight}, {"seed", cfg.seed}, {"d", cfg.encoder.d},
                {"layers", cfg.encoder.layers}};
  }
};

int cmd_train(const std::string& data_path, const std::string& test_path,
              const TrainFlags& tf, const VariantFlags& vf, const ModelFlags& mf,
              const std::string& out_path, const std::string& curve_path) {
  auto records = nmn::load_dataset(data_path);
  nmn::TrainConfig cfg = tf.resolve(vf, mf);
  json echo = tf.echo(cfg);
  echo["data"] = data_path;
  echo["out"] = out_path;
  echo["variant"] = vf.echo();
  echo_config("train", echo);

  nmn::TrainResult result = nmn::train(records, cfg);
  nmn::save_checkpoint(result.model, out_path);
  if (!curve_path.empty()) {
    std::ostringstream os;
    os << "epoch,loss,nll,aux\n";
    for (size_t e = 0; e < result.epoch_loss.size(); ++e) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e + 1, result.epoch_loss[e],
                    result.epoch_nll[e], result.epoch_aux[e]);
      os << buf;
    }
    write_text(curve_path, os.str());
  }
  if (result.aborted) {
    std::cerr << "training aborted at example '" << result.abort_example
              << "'; last good parameters saved to " << out_path << "\n";
    return 3;
  }
  json summary;
  summary["epochs"] = result.epoch_loss.size();
  summary["first_epoch_loss"] = result.epoch_loss.front();
  summary["final_epoch_loss"] = result.epoch_loss.back();
  summary["checkpoint"] = out_path;
  if (!test_path.empty()) {
    auto test_records = nmn::load_dataset(test_path);
    nmn::EvalReport report = nmn::evaluate(test_records, result.model, cfg.variant);
    summary["test_overall_f1"] = report.overall_f1;
    summary["test_overall_em"] = report.overall_em;
    std::cerr << report.to_table();
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& data_path, const VariantFlags& vf, const ModelFlags& mf,
             const std::string& report_path, const std::string& scores_path) {
  if (mf.ckpt.empty()) throw nmn::contract_error("eval requires --ckpt");
  auto records = nmn::load_dataset(data_path);
  nmn::Model model = nmn::load_checkpoint(mf.ckpt);
  nmn::VariantConfig cfg = vf.resolve();
  echo_config("eval", json{{"data", data_path}, {"ckpt", mf.ckpt}, {"variant", vf.echo()}});
  nmn::EvalReport report = nmn::evaluate(records, model, cfg);
  std::cout << report.to_table();
  if (!report_path.empty()) write_text(report_path, report.to_json_string() + "\n");
  if (!scores_path.empty()) {
    std::ostringstream os;
    for (double v : report.record_f1) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%.17g\n", v);
      os << buf;
    }
    write_text(scores_path, os.str());
  }
  return 0;
}

int cmd_ablate(const std::string& data_path, const std::string& test_path, int seeds,
               const TrainFlags& tf, const VariantFlags& vf, const ModelFlags& mf, int jobs,
               const std::string& out_path) {
  auto records = nmn::load_dataset(data_path);
  std::vector<nmn::DatasetRecord> train_data, test_data;
  if (!test_path.empty()) {
    train_data = records;
    test_data = nmn::load_dataset(test_path);
  } else {
    size_t cut = records.size() * 4 / 5;
    train_data.assign(records.begin(), records.begin() + cut);
    test_data.assign(records.begin() + cut, records.end());
  }
  nmn::TrainConfig base = tf.resolve(vf, mf);
  std::vector<uint64_t> seed_list;
  for (int s = 0; s < seeds; ++s) seed_list.push_back(mf.seed + static_cast<uint64_t>(s));
  json echo = tf.echo(base);
  echo["data"] = data_path;
  echo["test"] = test_path.empty() ? "(80/20 split)" : test_path;
  echo["seeds"] = seed_list;
  echo["jobs"] = jobs;
  echo_config("ablate", echo);

  nmn::AblationReport report = nmn::ablate(train_data, test_data, base, seed_list, jobs);
  std::cout << report.to_table();
  if (!out_path.empty()) write_text(out_path, report.to_json_string() + "\n");
  return 0;
}

int cmd_sigtest(const std::string& a_path, const std::string& b_path, int iterations,
                uint64_t seed) {
  std::vector<double> a = read_scores(a_path);
  std::vector<double> b = read_scores(b_path);
  echo_config("sigtest", json{{"a", a_path}, {"b", b_path}, {"iterations", iterations},
                              {"seed", seed}});
  double p = nmn::paired_permutation_test(a, b, iterations, seed);
  double mean_a = 0.0, mean_b = 0.0;
  for (double v : a) mean_a += v;
  for (double v : b) mean_b += v;
  json out;
  out["p_value"] = p;
  out["mean_a"] = mean_a / a.size();
  out["mean_b"] = mean_b / b.size();
  std::cout << out.dump(2) << "\n";
  return 0;
}

// --config <file>: JSON whose keys mirror long flag names; explicit flags win.
std::vector<std::string> merge_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw nmn::contract_error("--config needs a file path");
      config_path = args[i + 1];
      args.erase(args.begin() + i, args.begin() + i + 2);
      break;
    }
  }
  if (config_path.empty()) return args;
  if (args.empty() || args[0].rfind("-", 0) == 0)
    throw nmn::contract_error("--config requires a subcommand");
  std::ifstream in(config_path);
  if (!in) throw nmn::data_error("cannot open config file '" + config_path + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw nmn::data_error("config file: " + std::string(e.what()));
  }
  std::vector<std::string> merged;
  merged.push_back(args[0]);
  for (const auto& [key, value] : cfg.items()) {
    if (value.is_boolean()) {
      merged.push_back("--" + key + (value.get<bool>() ? "=true" : "=false"));
    } else {
      merged.push_back("--" + key);
      merged.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  merged.insert(merged.end(), args.begin() + 1, args.end());
  return merged;
}

}  // namespace

int main(int argc, char** argv) {
  nmn::logging::set_level(nmn::logging::Level::Info);
  nmn::logging::init_from_env();

  CLI::App app{"Differentiable neural-module interpreter for numerical reasoning over text"};
  app.name("nmn");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  // ingest
  std::string ingest_data;
  CLI::App* ingest = app.add_subcommand("ingest", "Validate a dataset and print index stats");
  ingest->add_option("data", ingest_data, "Dataset JSON file")->required();

  // run
  std::string run_data, run_program, run_dump, run_format = "json";
  int run_limit = 0;
  VariantFlags run_vf;
  ModelFlags run_mf;
  CLI::App* run = app.add_subcommand("run", "Execute programs and dump execution traces");
  run->add_option("--data", run_data, "Dataset JSON file")->required();
  run->add_option("--program", run_program,
                  "Program to run on every record (default: each record's own)");
  run->add_option("--dump", run_dump, "Directory for per-record trace dumps");
  run->add_option("--format", run_format, "Trace dump format")
      ->check(CLI::IsMember({"json", "csv"}));
  run->add_option("--limit", run_limit, "Only run the first N records");
  run_vf.attach(run);
  run_mf.attach(run);

  // synth
  int synth_n = 0;
  uint64_t synth_seed = 17;
  std::string synth_out, synth_mix;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--n", synth_n, "Number of records")->required();
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output dataset path")->required();
  synth->add_option("--mix", synth_mix,
                    "Question-type percentages, e.g. count=20,extract-number=15");

  // train
  std::string train_data, train_test, train_out = "model.ckpt.json", train_curve;
  TrainFlags train_tf;
  VariantFlags train_vf;
  ModelFlags train_mf;
  CLI::App* train = app.add_subcommand("train", "Train parameters on a dataset");
  train->add_option("--data", train_data, "Training dataset JSON file")->required();
  train->add_option("--test", train_test, "Optional test set evaluated after training");
  train->add_option("--out", train_out, "Checkpoint output path");
  train->add_option("--curve", train_curve, "Loss curve CSV output path");
  train_tf.attach(train);
  train_vf.attach(train);
  train_mf.attach(train, /*with_ckpt=*/false);

  // eval
  std::string eval_data, eval_report, eval_scores;
  VariantFlags eval_vf;
  ModelFlags eval_mf;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--data", eval_data, "Dataset JSON file")->required();
  eval->add_option("--report", eval_report, "Write the full report as JSON");
  eval->add_option("--scores", eval_scores, "Write per-record F1 scores (one per line)");
  eval_vf.attach(eval);
  eval_mf.attach(eval);

  // ablate
  std::string ablate_data, ablate_test, ablate_out;
  int ablate_seeds = 3, ablate_jobs = 2;
  TrainFlags ablate_tf;
  VariantFlags ablate_vf;
  ModelFlags ablate_mf;
  CLI::App* ablate = app.add_subcommand(
      "ablate", "Train and evaluate all four variants across seeds");
  ablate->add_option("--data", ablate_data, "Training dataset JSON file")->required();
  ablate->add_option("--test", ablate_test,
                     "Test dataset (default: hold out the last 20% of --data)");
  ablate->add_option("--seeds", ablate_seeds, "Number of seeds per variant");
  ablate->add_option("--jobs", ablate_jobs, "Parallel training jobs");
  ablate->add_option("--out", ablate_out, "Write the ablation report as JSON");
  ablate_tf.attach(ablate);
  ablate_vf.attach(ablate);
  ablate_mf.attach(ablate, /*with_ckpt=*/false);

  // sigtest
  std::string sig_a, sig_b;
  int sig_iters = 10000;
  uint64_t sig_seed = 17;
  CLI::App* sigtest =
      app.add_subcommand("sigtest", "Paired sign-flip permutation test on two score files");
  sigtest->add_option("--a", sig_a, "First score file (one number per line)")->required();
  sigtest->add_option("--b", sig_b, "Second score file")->required();
  sigtest->add_option("--iterations", sig_iters, "Permutation iterations");
  sigtest->add_option("--seed", sig_seed, "Permutation seed");

  try {
    std::vector<std::string> args = merge_config_args(argc, argv);
    std::vector<const char*> cargs;
    cargs.push_back(argv[0]);
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());

    if (*ingest) return cmd_ingest(ingest_data);
    if (*run)
      return cmd_run(run_data, run_program, run_vf, run_mf, run_dump, run_format, run_limit);
    if (*synth) return cmd_synth(synth_n, synth_seed, synth_out, synth_mix);
    if (*train)
      return cmd_train(train_data, train_test, train_tf, train_vf, train_mf, train_out,
                       train_curve);
    if (*eval) return cmd_eval(eval_data, eval_vf, eval_mf, eval_report, eval_scores);
    if (*ablate)
      return cmd_ablate(ablate_data, ablate_test, ablate_seeds, ablate_tf, ablate_vf,
                        ablate_mf, ablate_jobs, ablate_out);
    if (*sigtest) return cmd_sigtest(sig_a, sig_b, sig_iters, sig_seed);
    return 1;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const nmn::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const nmn::parse_error& e) {
    std::cerr << "program error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
