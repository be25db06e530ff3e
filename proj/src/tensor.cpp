#include "nmn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "nmn/log.hpp"

namespace nmn {

Tensor2::Tensor2(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
  if (r < 0 || c < 0) throw shape_error("Tensor2: negative dimension");
}

Tensor2 Tensor2::from_rows(std::initializer_list<std::initializer_list<double>> rs) {
  Tensor2 t;
  t.rows = static_cast<int>(rs.size());
  t.cols = rs.size() ? static_cast<int>(rs.begin()->size()) : 0;
  t.data.reserve(static_cast<size_t>(t.rows) * t.cols);
  for (const auto& r : rs) {
    if (static_cast<int>(r.size()) != t.cols) throw shape_error("from_rows: ragged rows");
    t.data.insert(t.data.end(), r.begin(), r.end());
  }
  return t;
}

Tensor2 Tensor2::row(std::initializer_list<double> v) {
  Tensor2 t(1, static_cast<int>(v.size()));
  std::copy(v.begin(), v.end(), t.data.begin());
  return t;
}

Tensor2 Tensor2::row(const std::vector<double>& v) {
  Tensor2 t(1, static_cast<int>(v.size()));
  t.data = v;
  return t;
}

Tensor2 Tensor2::identity(int n) {
  Tensor2 t(n, n, 0.0);
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::string Tensor2::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

bool Tensor2::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor2::sum() const {
  double s = 0.0;
  for (double v : data) s += v;
  return s;
}

double Tensor2::max_abs() const {
  double m = 0.0;
  for (double v : data) m = std::max(m, std::fabs(v));
  return m;
}

Tensor2 transposed(const Tensor2& a) {
  Tensor2 t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

void matmul_into(const Tensor2& a, const Tensor2& b, Tensor2& out, bool accumulate) {
  if (a.cols != b.rows)
    throw shape_error("matmul: inner dimensions disagree, lhs " + a.shape_str() + " rhs " +
                      b.shape_str());
  if (out.rows != a.rows || out.cols != b.cols) out = Tensor2(a.rows, b.cols);
  if (!accumulate) std::fill(out.data.begin(), out.data.end(), 0.0);
  const int n = a.rows, k = a.cols, m = b.cols;
  for (int i = 0; i < n; ++i) {
    const double* ai = a.data.data() + static_cast<size_t>(i) * k;
    double* oi = out.data.data() + static_cast<size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b.data.data() + static_cast<size_t>(p) * m;
      for (int j = 0; j < m; ++j) oi[j] += av * bp[j];
    }
  }
}

void matmul_nt_into(const Tensor2& a, const Tensor2& b, Tensor2& out, bool accumulate) {
  if (a.cols != b.cols)
    throw shape_error("matmul_nt: inner dimensions disagree, lhs " + a.shape_str() +
                      " rhs^T " + b.shape_str());
  if (out.rows != a.rows || out.cols != b.rows) out = Tensor2(a.rows, b.rows);
  if (!accumulate) std::fill(out.data.begin(), out.data.end(), 0.0);
  const int n = a.rows, k = a.cols, m = b.rows;
  for (int i = 0; i < n; ++i) {
    const double* ai = a.data.data() + static_cast<size_t>(i) * k;
    double* oi = out.data.data() + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      const double* bj = b.data.data() + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      oi[j] += acc;
    }
  }
}

void matmul_tn_into(const Tensor2& a, const Tensor2& b, Tensor2& out, bool accumulate) {
  if (a.rows != b.rows)
    throw shape_error("matmul_tn: inner dimensions disagree, lhs^T " + a.shape_str() +
                      " rhs " + b.shape_str());
  if (out.rows != a.cols || out.cols != b.cols) out = Tensor2(a.cols, b.cols);
  if (!accumulate) std::fill(out.data.begin(), out.data.end(), 0.0);
  const int n = a.cols, k = a.rows, m = b.cols;
  for (int p = 0; p < k; ++p) {
    const double* ap = a.data.data() + static_cast<size_t>(p) * n;
    const double* bp = b.data.data() + static_cast<size_t>(p) * m;
    for (int i = 0; i < n; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* oi = out.data.data() + static_cast<size_t>(i) * m;
      for (int j = 0; j < m; ++j) oi[j] += av * bp[j];
    }
  }
}

Tensor2& ParamStore::get(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw contract_error("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

const Tensor2& ParamStore::get(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw contract_error("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

const Tape::Node& Tape::node(Var v) const {
  check_valid(v, "node");
  return nodes_[static_cast<size_t>(v.id)];
}

void Tape::check_valid(Var v, const char* who) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw contract_error(std::string("Tape::") + who + ": invalid var");
}

Tape::Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Var Tape::input(Tensor2 v, std::string tag) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(v);
  n.tag = std::move(tag);
  return push(std::move(n));
}

Tape::Var Tape::param(const std::string& name, const ParamStore& store) {
  auto it = param_ids_.find(name);
  if (it != param_ids_.end()) return Var{it->second};
  Node n;
  n.op = Op::Param;
  n.value = store.get(name);
  n.tag = name;
  Var v = push(std::move(n));
  param_ids_[name] = v.id;
  return v;
}

Tape::Var Tape::matmul(Var a, Var b) {
  const Tensor2& av = value(a);
  const Tensor2& bv = value(b);
  Node n;
  n.op = Op::MatMul;
  n.a = a.id;
  n.b = b.id;
  matmul_into(av, bv, n.value, false);
  return push(std::move(n));
}

Tape::Var Tape::transpose(Var a) {
  Node n;
  n.op = Op::Transpose;
  n.a = a.id;
  n.value = transposed(value(a));
  return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) {
  const Tensor2& av = value(a);
  const Tensor2& bv = value(b);
  if (!av.same_shape(bv))
    throw shape_error("add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.value = av;
  for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += bv.data[i];
  return push(std::move(n));
}

Tape::Var Tape::sub(Var a, Var b) {
  const Tensor2& av = value(a);
  const Tensor2& bv = value(b);
  if (!av.same_shape(bv))
    throw shape_error("sub: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.value = av;
  for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] -= bv.data[i];
  return push(std::move(n));
}

Tape::Var Tape::mul(Var a, Var b) {
  const Tensor2& av = value(a);
  const Tensor2& bv = value(b);
  if (!av.same_shape(bv))
    throw shape_error("mul: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  Node n;
  n.op = Op::Mul;
  n.a = a.id;
  n.b = b.id;
  n.value = av;
  for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= bv.data[i];
  return push(std::move(n));
}

Tape::Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.scalar = c;
  n.value = value(a);
  for (double& v : n.value.data) v *= c;
  return push(std::move(n));
}

Tape::Var Tape::exp(Var a) {
  Node n;
  n.op = Op::Exp;
  n.a = a.id;
  n.value = value(a);
  for (double& v : n.value.data) v = std::exp(v);
  return push(std::move(n));
}

Tape::Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.a = a.id;
  n.value = value(a);
  for (double& v : n.value.data) v = std::tanh(v);
  return push(std::move(n));
}

Tape::Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a.id;
  n.value = value(a);
  for (double& v : n.value.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(n));
}

Tape::Var Tape::log_clamped(Var a, double eps) {
  Node n;
  n.op = Op::LogClamped;
  n.a = a.id;
  n.scalar = eps;
  n.value = value(a);
  for (double& v : n.value.data) v = std::log(std::max(v, eps));
  return push(std::move(n));
}

Tape::Var Tape::sum_all(Var a) {
  Node n;
  n.op = Op::SumAll;
  n.a = a.id;
  n.value = Tensor2(1, 1, value(a).sum());
  return push(std::move(n));
}

Tape::Var Tape::row_sums(Var a) {
  const Tensor2& av = value(a);
  Node n;
  n.op = Op::RowSums;
  n.a = a.id;
  n.value = Tensor2(av.rows, 1);
  for (int i = 0; i < av.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < av.cols; ++j) s += av.at(i, j);
    n.value.at(i, 0) = s;
  }
  return push(std::move(n));
}

Tape::Var Tape::gather_rows(Var a, std::vector<int> indices) {
  const Tensor2& av = value(a);
  Node n;
  n.op = Op::GatherRows;
  n.a = a.id;
  n.value = Tensor2(static_cast<int>(indices.size()), av.cols);
  for (size_t t = 0; t < indices.size(); ++t) {
    int r = indices[t];
    if (r < 0 || r >= av.rows)
      throw contract_error("gather_rows: index " + std::to_string(r) + " out of range for " +
                           av.shape_str());
    for (int j = 0; j < av.cols; ++j) n.value.at(static_cast<int>(t), j) = av.at(r, j);
  }
  n.indices = std::move(indices);
  return push(std::move(n));
}

Tape::Var Tape::tile_scalar(Var s, int rows, int cols) {
  const Tensor2& sv = value(s);
  if (sv.rows != 1 || sv.cols != 1) throw shape_error("tile_scalar: source must be 1x1");
  Node n;
  n.op = Op::TileScalar;
  n.a = s.id;
  n.value = Tensor2(rows, cols, sv.at(0, 0));
  return push(std::move(n));
}

Tape::Var Tape::tile_rows(Var row, int rows) {
  const Tensor2& rv = value(row);
  if (rv.rows != 1) throw shape_error("tile_rows: source must be a row vector");
  Node n;
  n.op = Op::TileRows;
  n.a = row.id;
  n.value = Tensor2(rows, rv.cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < rv.cols; ++j) n.value.at(i, j) = rv.at(0, j);
  return push(std::move(n));
}

Tape::Var Tape::scale_by(Var a, Var s) {
  const Tensor2& sv = value(s);
  if (sv.rows != 1 || sv.cols != 1) throw shape_error("scale_by: scalar operand must be 1x1");
  Node n;
  n.op = Op::ScaleBy;
  n.a = a.id;
  n.b = s.id;
  n.value = value(a);
  for (double& v : n.value.data) v *= sv.at(0, 0);
  return push(std::move(n));
}

Tape::Var Tape::div_by(Var a, Var s) {
  const Tensor2& sv = value(s);
  if (sv.rows != 1 || sv.cols != 1) throw shape_error("div_by: scalar operand must be 1x1");
  Node n;
  n.op = Op::DivBy;
  n.a = a.id;
  n.b = s.id;
  n.value = value(a);
  const double d = sv.at(0, 0);
  for (double& v : n.value.data) v /= d;
  return push(std::move(n));
}

Tape::Var Tape::pair_collect(Var a, Var b, std::vector<int> slot_map, int slots) {
  const Tensor2& av = value(a);
  const Tensor2& bv = value(b);
  if (av.rows != 1 || bv.rows != 1) throw shape_error("pair_collect: operands must be rows");
  if (static_cast<int>(slot_map.size()) != av.cols * bv.cols)
    throw shape_error("pair_collect: slot map size mismatch");
  Node n;
  n.op = Op::PairCollect;
  n.a = a.id;
  n.b = b.id;
  n.aux_int = bv.cols;
  n.value = Tensor2(1, slots, 0.0);
  for (int i = 0; i < av.cols; ++i)
    for (int j = 0; j < bv.cols; ++j) {
      int k = slot_map[static_cast<size_t>(i) * bv.cols + j];
      if (k < 0) continue;
      if (k >= slots) throw contract_error("pair_collect: slot out of range");
      n.value.at(0, k) += av.at(0, i) * bv.at(0, j);
    }
  n.indices = std::move(slot_map);
  return push(std::move(n));
}

Tape::SoftmaxResult Tape::row_softmax(Var s, const Tensor2* mask, MaskMode mode,
                                      MaskedRowPolicy policy) {
  const Tensor2& sv = value(s);
  if (mask != nullptr && !sv.same_shape(*mask))
    throw shape_error("row_softmax: mask shape " + mask->shape_str() +
                      " does not match scores " + sv.shape_str());

  if (mask != nullptr && mode == MaskMode::Literal) {
    // S o U, then a plain softmax over the product.
    Var masked = mul(s, input(*mask, "softmax-literal-mask"));
    return SoftmaxResult{row_softmax(masked), {}};
  }

  Node n;
  n.op = Op::SoftmaxRows;
  n.a = s.id;
  n.value = Tensor2(sv.rows, sv.cols);
  if (mask != nullptr) n.cmask = std::make_shared<const Tensor2>(*mask);

  for (int i = 0; i < sv.rows; ++i) {
    bool any = false;
    if (mask != nullptr) {
      for (int j = 0; j < sv.cols && !any; ++j) any = mask->at(i, j) != 0.0;
    } else {
      any = sv.cols > 0;
    }
    bool use_mask = mask != nullptr;
    if (mask != nullptr && !any) {
      if (policy == MaskedRowPolicy::Error)
        throw contract_error("row_softmax: row " + std::to_string(i) +
                             " is fully masked and no fallback was requested");
      n.fallback_rows.push_back(i);
      use_mask = false;  // this row falls back to the unmasked softmax
      logging::debug("row_softmax: fully masked row " + std::to_string(i) +
                     ", falling back to the unmasked softmax");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < sv.cols; ++j) {
      if (use_mask && mask->at(i, j) == 0.0) continue;
      mx = std::max(mx, sv.at(i, j));
    }
    double denom = 0.0;
    for (int j = 0; j < sv.cols; ++j) {
      if (use_mask && mask->at(i, j) == 0.0) {
        n.value.at(i, j) = 0.0;
        continue;
      }
      double e = std::exp(sv.at(i, j) - mx);
      n.value.at(i, j) = e;
      denom += e;
    }
    for (int j = 0; j < sv.cols; ++j) n.value.at(i, j) /= denom;
  }
  SoftmaxResult res;
  res.fallback_rows = n.fallback_rows;
  res.out = push(std::move(n));
  return res;
}

Tape::Var Tape::row_softmax(Var s) {
  return row_softmax(s, nullptr, MaskMode::NegInf, MaskedRowPolicy::Error).out;
}

Tape::Var Tape::marginalize(Var dist, Var a) {
  const Tensor2& dv = value(dist);
  const Tensor2& av = value(a);
  if (dv.rows != 1)
    throw shape_error("marginalize: dist must be a row vector, got " + dv.shape_str());
  if (dv.cols != av.rows)
    throw shape_error("marginalize: dist length " + std::to_string(dv.cols) +
                      " does not match matrix rows " + std::to_string(av.rows));
  if (std::fabs(dv.sum() - 1.0) > 1e-6)
    throw contract_error("marginalize: dist does not sum to 1 (got " +
                         std::to_string(dv.sum()) + ")");
  for (int i = 0; i < av.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < av.cols; ++j) s += av.at(i, j);
    if (std::fabs(s - 1.0) > 1e-6)
      throw contract_error("marginalize: matrix row " + std::to_string(i) +
                           " does not sum to 1 (got " + std::to_string(s) + ")");
  }
  return matmul(dist, a);
}

Tape::Var Tape::bilinear_scores(Var x, Var w, Var y) {
  const Tensor2& xv = value(x);
  const Tensor2& wv = value(w);
  const Tensor2& yv = value(y);
  if (xv.cols != wv.rows)
    throw shape_error("bilinear_scores: X " + xv.shape_str() + " does not chain with W " +
                      wv.shape_str());
  if (wv.cols != yv.cols)
    throw shape_error("bilinear_scores: W " + wv.shape_str() + " does not chain with Y " +
                      yv.shape_str());
  return matmul(matmul(x, w), transpose(y));
}

Tape::Var Tape::normalize_rows(Var a) {
  const Tensor2& av = value(a);
  Node n;
  n.op = Op::NormalizeRows;
  n.a = a.id;
  n.value = av;
  for (int i = 0; i < av.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < av.cols; ++j) s += av.at(i, j);
    if (!(s > 1e-300))
      throw contract_error("normalize_rows: row " + std::to_string(i) +
                           " has (near-)zero total mass");
    for (int j = 0; j < av.cols; ++j) n.value.at(i, j) /= s;
  }
  return push(std::move(n));
}

const Tensor2& Tape::value(Var v) const { return node(v).value; }

const Tensor2& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!ran_backward_) throw contract_error("Tape::grad: backward() has not run");
  return n.grad;
}

std::map<std::string, Tensor2> Tape::backward(Var loss) {
  const Node& ln = node(loss);
  if (ln.value.rows != 1 || ln.value.cols != 1)
    throw contract_error("backward: loss must be scalar (1x1), got " + ln.value.shape_str());

  for (Node& n : nodes_) n.grad = Tensor2(n.value.rows, n.value.cols, 0.0);
  nodes_[static_cast<size_t>(loss.id)].grad.at(0, 0) = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.max_abs() == 0.0) continue;
    Node* na = n.a >= 0 ? &nodes_[static_cast<size_t>(n.a)] : nullptr;
    Node* nb = n.b >= 0 ? &nodes_[static_cast<size_t>(n.b)] : nullptr;
    switch (n.op) {
      case Op::Input:
      case Op::Param:
        break;
      case Op::MatMul:
        matmul_nt_into(n.grad, nb->value, na->grad, true);
        matmul_tn_into(na->value, n.grad, nb->grad, true);
        break;
      case Op::Transpose:
        for (int i = 0; i < n.value.rows; ++i)
          for (int j = 0; j < n.value.cols; ++j) na->grad.at(j, i) += n.grad.at(i, j);
        break;
      case Op::Add:
        for (size_t i = 0; i < n.grad.data.size(); ++i) {
          na->grad.data[i] += n.grad.data[i];
          nb->grad.data[i] += n.grad.data[i];
        }
        break;
      case Op::Sub:
        for (size_t i = 0; i < n.grad.data.size(); ++i) {
          na->grad.data[i] += n.grad.data[i];
          nb->grad.data[i] -= n.grad.data[i];
        }
        break;
      case Op::Mul:
        for (size_t i = 0; i < n.grad.data.size(); ++i) {
          na->grad.data[i] += n.grad.data[i] * nb->value.data[i];
          nb->grad.data[i] += n.grad.data[i] * na->value.data[i];
        }
        break;
      case Op::Scale:
        for (size_t i = 0; i < n.grad.data.size(); ++i)
          na->grad.data[i] += n.grad.data[i] * n.scalar;
        break;
      case Op::Exp:
        for (size_t i = 0; i < n.grad.data.size(); ++i)
          na->grad.data[i] += n.grad.data[i] * n.value.data[i];
        break;
      case Op::Tanh:
        for (size_t i = 0; i < n.grad.data.size(); ++i)
          na->grad.data[i] += n.grad.data[i] * (1.0 - n.value.data[i] * n.value.data[i]);
        break;
      case Op::Sigmoid:
        for (size_t i = 0; i < n.grad.data.size(); ++i)
          na->grad.data[i] += n.grad.data[i] * n.value.data[i] * (1.0 - n.value.data[i]);
        break;
      case Op::LogClamped:
        for (size_t i = 0; i < n.grad.data.size(); ++i) {
          double x = na->value.data[i];
          if (x > n.scalar) na->grad.data[i] += n.grad.data[i] / x;
        }
        break;
      case Op::SumAll: {
        double g = n.grad.at(0, 0);
        for (double& v : na->grad.data) v += g;
        break;
      }
      case Op::RowSums:
        for (int i = 0; i < na->value.rows; ++i) {
          double g = n.grad.at(i, 0);
          for (int j = 0; j < na->value.cols; ++j) na->grad.at(i, j) += g;
        }
        break;
      case Op::GatherRows:
        for (size_t t = 0; t < n.indices.size(); ++t) {
          int r = n.indices[t];
          for (int j = 0; j < n.value.cols; ++j)
            na->grad.at(r, j) += n.grad.at(static_cast<int>(t), j);
        }
        break;
      case Op::TileScalar: {
        double g = 0.0;
        for (double v : n.grad.data) g += v;
        na->grad.at(0, 0) += g;
        break;
      }
      case Op::TileRows:
        for (int i = 0; i < n.value.rows; ++i)
          for (int j = 0; j < n.value.cols; ++j) na->grad.at(0, j) += n.grad.at(i, j);
        break;
      case Op::ScaleBy: {
        const double s = nb->value.at(0, 0);
        double gs = 0.0;
        for (size_t i = 0; i < n.grad.data.size(); ++i) {
          na->grad.data[i] += n.grad.data[i] * s;
          gs += n.grad.data[i] * na->value.data[i];
        }
        nb->grad.at(0, 0) += gs;
        break;
      }
      case Op::DivBy: {
        const double s = nb->value.at(0, 0);
        double gs = 0.0;
        for (size_t i = 0; i < n.grad.data.size(); ++i) {
          na->grad.data[i] += n.grad.data[i] / s;
          gs -= n.grad.data[i] * na->value.data[i] / (s * s);
        }
        nb->grad.at(0, 0) += gs;
        break;
      }
      case Op::PairCollect: {
        const int m = n.aux_int;
        for (int i = 0; i < na->value.cols; ++i)
          for (int j = 0; j < m; ++j) {
            int k = n.indices[static_cast<size_t>(i) * m + j];
            if (k < 0) continue;
            double g = n.grad.at(0, k);
            na->grad.at(0, i) += g * nb->value.at(0, j);
            nb->grad.at(0, j) += g * na->value.at(0, i);
          }
        break;
      }
      case Op::SoftmaxRows:
        for (int i = 0; i < n.value.rows; ++i) {
          double dot = 0.0;
          for (int j = 0; j < n.value.cols; ++j) dot += n.grad.at(i, j) * n.value.at(i, j);
          for (int j = 0; j < n.value.cols; ++j)
            na->grad.at(i, j) += n.value.at(i, j) * (n.grad.at(i, j) - dot);
        }
        break;
      case Op::NormalizeRows:
        for (int i = 0; i < n.value.rows; ++i) {
          double s = 0.0;
          for (int j = 0; j < n.value.cols; ++j) s += na->value.at(i, j);
          double dot = 0.0;
          for (int j = 0; j < n.value.cols; ++j) dot += n.grad.at(i, j) * n.value.at(i, j);
          for (int j = 0; j < n.value.cols; ++j)
            na->grad.at(i, j) += (n.grad.at(i, j) - dot) / s;
        }
        break;
    }
  }

  ran_backward_ = true;
  std::map<std::string, Tensor2> table;
  for (const auto& [name, id] : param_ids_) table[name] = nodes_[static_cast<size_t>(id)].grad;
  return table;
}

double grad_check(
    const std::function<double(const ParamStore&, std::map<std::string, Tensor2>*)>& f,
    const ParamStore& params, double eps) {
  std::map<std::string, Tensor2> analytic;
  f(params, &analytic);

  double worst = 0.0;
  for (const auto& [name, base] : params.values()) {
    auto it = analytic.find(name);
    if (it == analytic.end()) continue;  // parameter not touched by f
    const Tensor2& g = it->second;
    for (size_t i = 0; i < base.data.size(); ++i) {
      ParamStore perturbed = params;
      perturbed.get(name).data[i] = base.data[i] + eps;
      double fp = f(perturbed, nullptr);
      perturbed.get(name).data[i] = base.data[i] - eps;
      double fm = f(perturbed, nullptr);
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw contract_error("grad_check: non-finite value at perturbed point of '" + name +
                             "'");
      double numeric = (fp - fm) / (2.0 * eps);
      double a = g.data[i];
      double err = std::fabs(a - numeric) / (std::fabs(a) + std::fabs(numeric) + 1e-12);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace nmn
