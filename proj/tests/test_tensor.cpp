#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "nmn/rng.hpp"
#include "nmn/tensor.hpp"

using nmn::MaskMode;
using nmn::MaskedRowPolicy;
using nmn::ParamStore;
using nmn::Rng;
using nmn::Tape;
using nmn::Tensor2;

namespace {

Tensor2 random_tensor(Rng& rng, int r, int c, double scale = 1.0) {
  Tensor2 t(r, c);
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

// independent softmax used as the oracle for the tape implementation
std::vector<double> softmax_row(std::vector<double> row) {
  double mx = row[0];
  for (double v : row) mx = std::max(mx, v);
  double denom = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    denom += v;
  }
  for (double& v : row) v /= denom;
  return row;
}

}  // namespace

TEST_CASE("bilinear_scores matches hand expansion") {
  Tape t;
  SUBCASE("identity weights select matching rows") {
    auto x = t.input(Tensor2::from_rows({{1, 0}, {0, 1}}));
    auto w = t.input(Tensor2::identity(2));
    auto y = t.input(Tensor2::from_rows({{1, 0}}));
    auto s = t.bilinear_scores(x, w, y);
    CHECK(t.value(s).at(0, 0) == doctest::Approx(1.0));
    CHECK(t.value(s).at(1, 0) == doctest::Approx(0.0));
  }
  SUBCASE("hand expanded diagonal case") {
    // 1*2*1 + 1*3*2 = 8
    auto x = t.input(Tensor2::from_rows({{1, 1}}));
    auto w = t.input(Tensor2::from_rows({{2, 0}, {0, 3}}));
    auto y = t.input(Tensor2::from_rows({{1, 2}}));
    auto s = t.bilinear_scores(x, w, y);
    CHECK(t.value(s).at(0, 0) == doctest::Approx(8.0));
  }
  SUBCASE("zero input gives zero scores") {
    auto x = t.input(Tensor2(3, 2, 0.0));
    auto w = t.input(Tensor2::identity(2));
    auto y = t.input(Tensor2::from_rows({{1, 2}, {3, 4}}));
    auto s = t.bilinear_scores(x, w, y);
    for (double v : t.value(s).data) CHECK(v == 0.0);
  }
  SUBCASE("shape mismatch names the operands") {
    auto x = t.input(Tensor2(2, 3));
    auto w = t.input(Tensor2(4, 4));
    auto y = t.input(Tensor2(2, 4));
    CHECK_THROWS_WITH_AS(t.bilinear_scores(x, w, y),
                         doctest::Contains("X 2x3 does not chain with W 4x4"),
                         nmn::shape_error);
  }
}

TEST_CASE("row_softmax basics") {
  Tape t;
  SUBCASE("symmetric scores split evenly") {
    auto s = t.row_softmax(t.input(Tensor2::row({0.0, 0.0})));
    CHECK(t.value(s).at(0, 0) == doctest::Approx(0.5));
    CHECK(t.value(s).at(0, 1) == doctest::Approx(0.5));
  }
  SUBCASE("frozen two-way case") {
    // oracle: e/(e+1) = 0.7310585786300049
    auto s = t.row_softmax(t.input(Tensor2::row({1.0, 0.0})));
    CHECK(t.value(s).at(0, 0) == doctest::Approx(0.73106).epsilon(1e-4));
    CHECK(t.value(s).at(0, 1) == doctest::Approx(0.26894).epsilon(1e-4));
    CHECK(t.value(s).at(0, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
  }
  SUBCASE("neg-inf mask leaves single support") {
    Tensor2 mask = Tensor2::row({1.0, 0.0});
    auto res = t.row_softmax(t.input(Tensor2::row({5.0, 5.0})), &mask, MaskMode::NegInf);
    CHECK(t.value(res.out).at(0, 0) == 1.0);
    CHECK(t.value(res.out).at(0, 1) == 0.0);
    CHECK(res.fallback_rows.empty());
  }
}

TEST_CASE("row_softmax properties over random masked instances") {
  Rng rng(11);
  for (int iter = 0; iter < 200; ++iter) {
    Tape t;
    int rows = rng.range(1, 5), cols = rng.range(2, 7);
    Tensor2 scores = random_tensor(rng, rows, cols, 3.0);
    Tensor2 mask(rows, cols);
    for (int i = 0; i < rows; ++i) {
      bool any = false;
      for (int j = 0; j < cols; ++j) {
        mask.at(i, j) = rng.chance(0.6) ? 1.0 : 0.0;
        any = any || mask.at(i, j) != 0.0;
      }
      if (!any) mask.at(i, rng.bounded(cols)) = 1.0;
    }
    auto res = t.row_softmax(t.input(scores), &mask, MaskMode::NegInf);
    const Tensor2& a = t.value(res.out);
    for (int i = 0; i < rows; ++i) {
      double sum = 0.0, masked_mass = 0.0;
      for (int j = 0; j < cols; ++j) {
        CHECK(a.at(i, j) >= 0.0);
        CHECK(a.at(i, j) <= 1.0);
        sum += a.at(i, j);
        if (mask.at(i, j) == 0.0) masked_mass += a.at(i, j);
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-9);
      CHECK(masked_mass < 1e-12);
    }
  }
}

TEST_CASE("literal masking equals the zero-then-softmax oracle exactly") {
  Rng rng(12);
  for (int iter = 0; iter < 100; ++iter) {
    Tape t;
    int rows = rng.range(1, 4), cols = rng.range(2, 6);
    Tensor2 scores = random_tensor(rng, rows, cols, 2.0);
    Tensor2 mask(rows, cols);
    for (double& v : mask.data) v = rng.chance(0.5) ? 1.0 : 0.0;
    auto res = t.row_softmax(t.input(scores), &mask, MaskMode::Literal);
    const Tensor2& got = t.value(res.out);
    for (int i = 0; i < rows; ++i) {
      std::vector<double> zeroed(static_cast<size_t>(cols));
      for (int j = 0; j < cols; ++j) zeroed[static_cast<size_t>(j)] = scores.at(i, j) * mask.at(i, j);
      std::vector<double> want = softmax_row(zeroed);
      for (int j = 0; j < cols; ++j) CHECK(got.at(i, j) == want[static_cast<size_t>(j)]);
    }
  }
}

TEST_CASE("fully masked rows follow the chosen policy") {
  Tensor2 scores = Tensor2::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  Tensor2 mask = Tensor2::from_rows({{1.0, 0.0}, {0.0, 0.0}});
  SUBCASE("error policy throws") {
    Tape t;
    CHECK_THROWS_AS(
        t.row_softmax(t.input(scores), &mask, MaskMode::NegInf, MaskedRowPolicy::Error),
        nmn::contract_error);
  }
  SUBCASE("fallback policy uses the unmasked softmax and reports the row") {
    Tape t;
    auto res = t.row_softmax(t.input(scores), &mask, MaskMode::NegInf,
                             MaskedRowPolicy::UnmaskedFallback);
    REQUIRE(res.fallback_rows == std::vector<int>{1});
    std::vector<double> want = softmax_row({3.0, 4.0});
    CHECK(t.value(res.out).at(1, 0) == want[0]);
    CHECK(t.value(res.out).at(1, 1) == want[1]);
    CHECK(t.value(res.out).at(0, 1) == 0.0);
  }
}

TEST_CASE("marginalize") {
  Tape t;
  SUBCASE("identity rows pass the distribution through") {
    auto d = t.input(Tensor2::row({0.5, 0.5}));
    auto a = t.input(Tensor2::identity(2));
    auto out = t.marginalize(d, a);
    CHECK(t.value(out).at(0, 0) == doctest::Approx(0.5));
  }
  SUBCASE("one-hot selects a row") {
    auto d = t.input(Tensor2::row({1.0, 0.0}));
    auto a = t.input(Tensor2::from_rows({{0.73106, 0.26894}, {0.5, 0.5}}));
    auto out = t.marginalize(d, a);
    CHECK(t.value(out).at(0, 0) == doctest::Approx(0.73106));
    CHECK(t.value(out).at(0, 1) == doctest::Approx(0.26894));
  }
  SUBCASE("constant rows reproduce the row") {
    auto d = t.input(Tensor2::row({0.25, 0.25, 0.25, 0.25}));
    auto a = t.input(Tensor2::from_rows(
        {{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}}));
    auto out = t.marginalize(d, a);
    CHECK(t.value(out).at(0, 0) == doctest::Approx(0.3));
    CHECK(t.value(out).at(0, 1) == doctest::Approx(0.7));
  }
  SUBCASE("length mismatch raises a dimension error") {
    auto d = t.input(Tensor2::row({1.0, 0.0}));
    auto a = t.input(Tensor2::identity(3));
    CHECK_THROWS_AS(t.marginalize(d, a), nmn::shape_error);
  }
  SUBCASE("unnormalized inputs violate the contract") {
    auto d = t.input(Tensor2::row({0.9, 0.5}));
    auto a = t.input(Tensor2::identity(2));
    CHECK_THROWS_AS(t.marginalize(d, a), nmn::contract_error);
  }
}

TEST_CASE("marginalize preserves mass on random normalized inputs") {
  Rng rng(13);
  for (int iter = 0; iter < 200; ++iter) {
    Tape t;
    int a = rng.range(1, 6), b = rng.range(1, 6);
    Tensor2 dist(1, a);
    for (double& v : dist.data) v = rng.uniform() + 1e-3;
    double s = dist.sum();
    for (double& v : dist.data) v /= s;
    auto att = t.row_softmax(t.input(random_tensor(rng, a, b, 2.0)));
    auto out = t.marginalize(t.input(dist), att);
    CHECK(std::fabs(t.value(out).sum() - 1.0) <= 1e-6);
  }
}

TEST_CASE("backprop basics") {
  SUBCASE("d sum(W) / dW is all ones") {
    ParamStore store;
    store.set("w", Tensor2::from_rows({{1.0, -2.0}, {0.5, 3.0}}));
    Tape t;
    auto loss = t.sum_all(t.param("w", store));
    auto grads = t.backward(loss);
    for (double v : grads.at("w").data) CHECK(v == 1.0);
  }
  SUBCASE("d x^2 at 3 is 6") {
    ParamStore store;
    store.set("x", Tensor2(1, 1, 3.0));
    Tape t;
    auto x = t.param("x", store);
    auto grads = t.backward(t.sum_all(t.mul(x, x)));
    CHECK(grads.at("x").at(0, 0) == doctest::Approx(6.0));
  }
  SUBCASE("parameter unreachable from the loss reports zeros") {
    ParamStore store;
    store.set("used", Tensor2(1, 1, 2.0));
    store.set("unused", Tensor2(2, 2, 1.0));
    Tape t;
    auto u = t.param("used", store);
    t.param("unused", store);
    auto grads = t.backward(t.sum_all(t.mul(u, u)));
    CHECK(grads.at("unused").max_abs() == 0.0);
    CHECK(grads.at("used").at(0, 0) == doctest::Approx(4.0));
  }
  SUBCASE("non-scalar loss is rejected") {
    Tape t;
    auto v = t.input(Tensor2(2, 2, 1.0));
    CHECK_THROWS_AS(t.backward(v), nmn::contract_error);
  }
}

namespace {

// small attention-shaped composite: scores -> softmax -> marginalize -> nll
double attention_chain(const ParamStore& params, std::map<std::string, Tensor2>* grads) {
  Tape t;
  auto p = t.param("p", params);
  auto w = t.param("w", params);
  auto y = t.param("y", params);
  auto scores = t.bilinear_scores(p, w, y);
  auto att = t.row_softmax(scores);
  Tensor2 dist(1, t.value(p).rows, 1.0 / t.value(p).rows);
  auto marg = t.marginalize(t.input(dist), att);
  Tensor2 pick(1, t.value(marg).cols, 0.0);
  pick.at(0, 0) = 1.0;
  auto mass = t.sum_all(t.mul(marg, t.input(pick)));
  auto loss = t.scale(t.log_clamped(mass, 1e-12), -1.0);
  if (grads) *grads = t.backward(loss);
  return t.value(loss).at(0, 0);
}

}  // namespace

TEST_CASE("backprop on the attention chain matches central differences") {
  Rng rng(21);
  ParamStore params;
  params.set("p", random_tensor(rng, 4, 3, 0.7));
  params.set("w", random_tensor(rng, 3, 3, 0.7));
  params.set("y", random_tensor(rng, 2, 3, 0.7));
  CHECK(nmn::grad_check(attention_chain, params, 1e-5) < 1e-4);
}

TEST_CASE("grad_check reference behaviors") {
  SUBCASE("sum of squares is quadratic, so the error is tiny") {
    Rng rng(22);
    ParamStore params;
    params.set("theta", random_tensor(rng, 3, 4, 1.5));
    auto f = [](const ParamStore& p, std::map<std::string, Tensor2>* g) {
      Tape t;
      auto x = t.param("theta", p);
      auto loss = t.sum_all(t.mul(x, x));
      if (g) *g = t.backward(loss);
      return t.value(loss).at(0, 0);
    };
    CHECK(nmn::grad_check(f, params, 1e-5) < 1e-8);
  }
  SUBCASE("constant function has matching zero gradients") {
    ParamStore params;
    params.set("theta", Tensor2(2, 2, 1.0));
    auto f = [](const ParamStore& p, std::map<std::string, Tensor2>* g) {
      Tape t;
      auto x = t.param("theta", p);
      auto loss = t.sum_all(t.scale(x, 0.0));
      if (g) *g = t.backward(loss);
      return t.value(loss).at(0, 0);
    };
    CHECK(nmn::grad_check(f, params, 1e-5) == 0.0);
  }
}

TEST_CASE("pair_collect and broadcast ops differentiate correctly") {
  Rng rng(23);
  ParamStore params;
  Tensor2 a(1, 3), b(1, 3);
  for (double& v : a.data) v = rng.uniform() + 0.1;
  for (double& v : b.data) v = rng.uniform() + 0.1;
  params.set("a", a);
  params.set("b", b);
  params.set("s", Tensor2(1, 1, 0.8));
  auto f = [](const ParamStore& p, std::map<std::string, Tensor2>* g) {
    Tape t;
    auto av = t.param("a", p);
    auto bv = t.param("b", p);
    auto sv = t.param("s", p);
    std::vector<int> slots = {0, 1, -1, 1, 0, 2, 2, 1, 0};
    auto collected = t.pair_collect(av, bv, slots, 3);
    auto scaled = t.div_by(t.scale_by(collected, sv), t.mul(sv, sv));
    auto spread = t.add(t.tile_scalar(t.sum_all(scaled), 1, 4),
                        t.tile_rows(t.input(Tensor2::row({0.1, 0.2, 0.3, 0.4})), 1));
    auto loss = t.sum_all(t.mul(spread, spread));
    if (g) *g = t.backward(loss);
    return t.value(loss).at(0, 0);
  };
  CHECK(nmn::grad_check(f, params, 1e-5) < 1e-6);
}

TEST_CASE("normalize_rows rejects zero-mass rows") {
  Tape t;
  CHECK_THROWS_AS(t.normalize_rows(t.input(Tensor2(1, 3, 0.0))), nmn::contract_error);
}
