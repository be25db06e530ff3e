#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "hard_oracle.hpp"
#include "json.hpp"
#include "nmn/interpreter.hpp"
#include "nmn/train.hpp"

using namespace nmn;
using namespace nmntest;

namespace {

Model smoke_model(const std::string& question, const std::string& passage) {
  DatasetRecord r;
  r.question = question;
  r.passage = passage;
  r.answer = Answer::make_number(0);
  EncoderConfig cfg;
  cfg.d = 16;
  return make_model(Vocabulary::build({r}), cfg, 11);
}

}  // namespace

TEST_CASE("single-number paragraph answers deterministically in every variant") {
  const std::string q = "How many yards did Rivera gain ?";
  const std::string p = "Rivera rushed for 57 yards in the game .";
  Model model = smoke_model(q, p);
  for (const auto& name : {"original", "qai", "qai+nepc", "full"}) {
    RunOutput out = execute("find-num(find(Q[5:6]))", q, p, model,
                            VariantConfig::by_name(name));
    CHECK(out.answer.kind == Answer::Kind::Number);
    CHECK(out.answer.number == 57.0);
  }
}

TEST_CASE("trace structure") {
  const std::string q = "How many yards did Rivera gain ?";
  // the numberless middle sentence keeps the sentence-mode aux strictly positive
  const std::string p = "Dalton lost 3 yards . The crowd roared . Rivera rushed for 57 yards .";
  Model model = smoke_model(q, p);
  RunOutput out =
      execute("find-num(Q[5:6], find(Q[5:6]))", q, p, model, VariantConfig::full());
  SUBCASE("node count matches the program") {
    CHECK(out.trace.nodes.size() == 2);
    CHECK(out.trace.nodes[0].module == "find");
    CHECK(out.trace.nodes[1].module == "find-num");
  }
  SUBCASE("total aux equals the per-node sum") {
    double sum = 0.0;
    for (const auto& n : out.trace.nodes) sum += n.aux;
    CHECK(out.trace.total_aux == doctest::Approx(sum).epsilon(1e-12));
    CHECK(out.trace.total_aux > 0.0);
  }
  SUBCASE("snapshots are distributions") {
    for (const auto& n : out.trace.nodes) {
      double s = 0.0;
      for (double v : n.output.data) {
        CHECK(v >= 0.0);
        s += v;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("execution is deterministic") {
    RunOutput again =
        execute("find-num(Q[5:6], find(Q[5:6]))", q, p, model, VariantConfig::full());
    CHECK(again.trace.nodes[1].output.data == out.trace.nodes[1].output.data);
  }
}

TEST_CASE("errors propagate with the failing node named") {
  const std::string q = "How many yards did Rivera gain ?";
  const std::string p = "Rivera had a quiet day .";
  Model model = smoke_model(q, p);
  CHECK_THROWS_WITH_AS(
      execute("find-num(find(Q[5:6]))", q, p, model, VariantConfig::original()),
      doctest::Contains("find-num"), exec_error);
}

TEST_CASE("empty programs are rejected before execution") {
  CHECK_THROWS_AS(parse_program(""), parse_error);
  CHECK_THROWS_AS(parse_program("   "), parse_error);
}

TEST_CASE("decode_answer") {
  ParagraphIndex pidx = build_paragraph_index("Rivera gained 3 then 5 yards .");
  REQUIRE(pidx.number_count() == 2);
  SUBCASE("number argmax picks the heavier value") {
    Answer a = decode_answer(ValueType::NumDist, Tensor2::row({0.2, 0.8}), {}, pidx);
    CHECK(a.kind == Answer::Kind::Number);
    CHECK(a.number == 5.0);
  }
  SUBCASE("uniform paragraph attention takes the earliest max-length span") {
    const int m = pidx.token_count();
    Tensor2 uniform(1, m, 1.0 / m);
    Answer a = decode_answer(ValueType::Span, uniform, {}, pidx);
    REQUIRE(a.spans.size() == 1);
    CHECK(a.spans[0] == pidx.span_text(0, std::min(m, 8) - 1));
  }
  SUBCASE("span scan among two-token windows matches exhaustive enumeration") {
    Tensor2 dist = Tensor2::row({0.1, 0.4, 0.4, 0.1, 0.0, 0.0, 0.0});
    Answer a = decode_answer(ValueType::Span, dist, {}, pidx, /*max_span_len=*/2);
    CHECK(a.spans[0] == pidx.span_text(1, 2));
    // exhaustive oracle over all spans of length <= 2
    double best = -1.0;
    int bs = 0, be = 0;
    for (int s = 0; s < 7; ++s)
      for (int e = s; e < std::min(7, s + 2); ++e) {
        double mass = 0.0;
        for (int i = s; i <= e; ++i) mass += dist.at(0, i);
        if (mass > best) {
          best = mass;
          bs = s;
          be = e;
        }
      }
    CHECK(a.spans[0] == pidx.span_text(bs, be));
  }
  SUBCASE("count and year-diff decode to their argmax support") {
    Tensor2 counts(1, 10, 0.0);
    counts.at(0, 4) = 1.0;
    CHECK(decode_answer(ValueType::CountDist, counts, {}, pidx).count == 4);
    Answer yd = decode_answer(ValueType::YearDiffDist, Tensor2::row({0.3, 0.7}), {0, 7}, pidx);
    CHECK(yd.number == 7.0);
  }
}

TEST_CASE("trace dumps round trip losslessly") {
  const std::string q = "How many yards did Rivera gain ?";
  const std::string p = "Dalton lost 3 yards . Rivera rushed for 57 yards .";
  Model model = smoke_model(q, p);
  RunOutput out =
      execute("find-num(find(Q[5:6]))", q, p, model, VariantConfig::original());
  SUBCASE("json carries every node and exact values") {
    std::string dumped = dump_trace(out.trace, TraceFormat::Json);
    auto j = nlohmann::json::parse(dumped);
    REQUIRE(j["nodes"].size() == out.trace.nodes.size());
    for (size_t i = 0; i < out.trace.nodes.size(); ++i) {
      auto values = j["nodes"][i]["values"].get<std::vector<double>>();
      REQUIRE(values.size() == out.trace.nodes[i].output.data.size());
      for (size_t k = 0; k < values.size(); ++k)
        CHECK(values[k] == out.trace.nodes[i].output.data[k]);
    }
  }
  SUBCASE("csv carries one row per value at 17 significant digits") {
    std::string csv = dump_trace(out.trace, TraceFormat::Csv);
    size_t rows = 0;
    for (char c : csv)
      if (c == '\n') ++rows;
    size_t want = 1;  // header
    for (const auto& n : out.trace.nodes) want += n.output.data.size();
    CHECK(rows == want);
    double v = out.trace.nodes[1].output.data[0];
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    CHECK(csv.find(buf) != std::string::npos);
  }
}

TEST_CASE("soft execution agrees with the set-semantics oracle") {
  Rng rng(777);
  int checked = 0;
  for (int iter = 0; iter < 120; ++iter) {
    HardInstance inst = make_hard_instance(rng);
    Program program = parse_program(inst.program_text);
    typecheck(program, inst.n_q);
    Answer want = hard_execute(inst, program);
    CAPTURE(inst.program_text);
    Answer got_original = soft_execute(inst, program, VariantConfig::original());
    CHECK(answers_equal(got_original, want));
    VariantConfig masked = VariantConfig::original();
    masked.nepc = true;
    Answer got_masked = soft_execute(inst, program, masked);
    CHECK(answers_equal(got_masked, want));
    ++checked;
  }
  CHECK(checked == 120);
}
