#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nmn/errors.hpp"

namespace nmn {

// Dense row-major 2-D array of doubles. rows*cols == data.size() always.
struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int r, int c, double fill = 0.0);

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rs);
  static Tensor2 row(std::initializer_list<double> v);
  static Tensor2 row(const std::vector<double>& v);
  static Tensor2 identity(int n);

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const;
  bool all_finite() const;
  double sum() const;
  double max_abs() const;
};

Tensor2 transposed(const Tensor2& a);
// out = a*b, out += a*b when accumulate
void matmul_into(const Tensor2& a, const Tensor2& b, Tensor2& out, bool accumulate);
// out (+)= a * b^T
void matmul_nt_into(const Tensor2& a, const Tensor2& b, Tensor2& out, bool accumulate);
// out (+)= a^T * b
void matmul_tn_into(const Tensor2& a, const Tensor2& b, Tensor2& out, bool accumulate);

// Named parameter set shared by tape executions and the optimizer.
class ParamStore {
 public:
  bool has(const std::string& name) const { return values_.count(name) != 0; }
  Tensor2& get(const std::string& name);
  const Tensor2& get(const std::string& name) const;
  void set(const std::string& name, Tensor2 value) { values_[name] = std::move(value); }
  const std::map<std::string, Tensor2>& values() const { return values_; }
  std::map<std::string, Tensor2>& values() { return values_; }

 private:
  std::map<std::string, Tensor2> values_;
};

enum class MaskMode { NegInf, Literal };
// What to do with a row whose mask is all zero in NegInf mode.
enum class MaskedRowPolicy { Error, UnmaskedFallback };

// Reverse-mode tape. Forward values are computed eagerly at record time;
// backward() walks the (acyclic by construction) recording in reverse.
// A tape instance is confined to one thread.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  struct SoftmaxResult {
    Var out;
    std::vector<int> fallback_rows;  // rows that were fully masked and fell back
  };

  Var input(Tensor2 v, std::string tag = "");
  // Copies the named tensor out of the store; repeated calls share one node.
  Var param(const std::string& name, const ParamStore& store);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var exp(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  // log(max(x, eps)); gradient is zero on the clamped region
  Var log_clamped(Var a, double eps = 1e-12);
  Var sum_all(Var a);
  Var row_sums(Var a);
  Var gather_rows(Var a, std::vector<int> indices);
  Var tile_scalar(Var s, int rows, int cols);
  Var tile_rows(Var row, int rows);  // broadcast a 1xc row to rows x c
  Var scale_by(Var a, Var s);  // a * s[0,0]
  Var div_by(Var a, Var s);    // a / s[0,0]
  // out[0,k] = sum over (i,j) with slot_map[i*M+j]==k of a[0,i]*b[0,j]
  Var pair_collect(Var a, Var b, std::vector<int> slot_map, int slots);

  // Row-normalized exponentials. In NegInf mode masked entries are excluded
  // from the support entirely; a fully-masked row follows `policy`.
  // Literal mode multiplies scores by the mask and softmaxes the product,
  // identical to the two-step mul+softmax route.
  SoftmaxResult row_softmax(Var s, const Tensor2* mask, MaskMode mode,
                            MaskedRowPolicy policy = MaskedRowPolicy::Error);
  Var row_softmax(Var s);

  // out[0,j] = sum_i dist[0,i] * a[i,j]; both inputs must be normalized.
  Var marginalize(Var dist, Var a);
  // out[i,j] = X_i . (W . Y_j)
  Var bilinear_scores(Var x, Var w, Var y);
  // Row-wise division by the row sum; throws on a (near-)zero row.
  Var normalize_rows(Var a);

  const Tensor2& value(Var v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  // Accumulates gradients for everything reachable from `loss` (a 1x1 node)
  // and returns them keyed by parameter name; unreachable registered
  // parameters report zeros.
  std::map<std::string, Tensor2> backward(Var loss);
  const Tensor2& grad(Var v) const;

 private:
  enum class Op {
    Input,
    Param,
    MatMul,
    Transpose,
    Add,
    Sub,
    Mul,
    Scale,
    Exp,
    Tanh,
    Sigmoid,
    LogClamped,
    SumAll,
    RowSums,
    GatherRows,
    TileScalar,
    TileRows,
    ScaleBy,
    DivBy,
    PairCollect,
    SoftmaxRows,
    NormalizeRows,
  };

  struct Node {
    Op op;
    int a = -1, b = -1;
    Tensor2 value;
    Tensor2 grad;  // allocated during backward
    double scalar = 0.0;
    std::vector<int> indices;                // gather targets / pair slot map
    int aux_int = 0;                         // pair_collect: cols of b
    std::shared_ptr<const Tensor2> cmask;    // softmax neg-inf mask
    std::vector<int> fallback_rows;          // softmax rows that fell back
    std::string tag;
  };

  const Node& node(Var v) const;
  Var push(Node n);
  void check_valid(Var v, const char* who) const;

  std::vector<Node> nodes_;
  std::map<std::string, int> param_ids_;
  bool ran_backward_ = false;
};

// Max relative gradient error between backward() and central differences.
// `f` must be deterministic: called as f(params, &grads) once for the
// analytic pass and f(params, nullptr) for every perturbed evaluation.
double grad_check(
    const std::function<double(const ParamStore&, std::map<std::string, Tensor2>*)>& f,
    const ParamStore& params, double eps = 1e-5);

}  // namespace nmn
