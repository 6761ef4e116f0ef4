#include <maipp/nn/tape.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace maipp::nn {

void ParamSet::add(std::string name, Mat value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  index_.emplace(name, values_.size());
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

std::size_t ParamSet::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], Mat::Zero(values_[i].rows(), values_[i].cols()));
  return out;
}

bool ParamSet::all_finite() const {
  for (const auto& v : values_) {
    if (!v.allFinite()) return false;
  }
  return true;
}

void ParamSet::axpy(double s, const ParamSet& other) {
  if (other.size() != size()) throw std::invalid_argument("ParamSet::axpy: layout mismatch");
  for (std::size_t i = 0; i < size(); ++i) values_[i] += s * other.values_[i];
}

const Mat& Var::value() const { return tape_->value(id_); }

const Mat& Tape::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.ref ? *n.ref : n.value;
}

Mat& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) {
    const Mat& v = n.ref ? *n.ref : n.value;
    n.grad = Mat::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

int Tape::push(Mat value, bool requires_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::constant(Mat value) { return {this, push(std::move(value), false, nullptr)}; }

Var Tape::param(const ParamSet& params, std::size_t index) {
  if (params_ && params_ != &params) throw std::logic_error("tape bound to a different ParamSet");
  params_ = &params;
  auto it = param_nodes_.find(index);
  if (it != param_nodes_.end()) return {this, it->second};
  Node n;
  n.ref = &params[index];
  n.requires_grad = true;
  n.param = static_cast<int>(index);
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(index, id);
  return {this, id};
}

void Tape::backward(Var out) {
  if (out.tape() != this) throw std::logic_error("backward: foreign variable");
  if (out.rows() != 1 || out.cols() != 1) throw std::invalid_argument("backward: output must be 1x1");
  grad(out.id())(0, 0) += 1.0;
  for (int id = out.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward && n.grad.size() > 0) n.backward(*this, id);
  }
}

void Tape::accumulate(ParamSet& grads, double s) const {
  for (const auto& [index, id] : param_nodes_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() > 0) grads[index] += s * n.grad;
  }
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw std::logic_error("variables on different tapes");
  return *a.tape();
}

bool any_grad(Var a) { return a.tape()->requires_grad(a.id()); }
bool any_grad(Var a, Var b) { return any_grad(a) || any_grad(b); }

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  const int ia = a.id(), ib = b.id();
  Mat v = a.value() * b.value();
  return {&t, t.push(std::move(v), any_grad(a, b), [ia, ib](Tape& tp, int self) {
            const Mat g = tp.grad(self);
            if (tp.requires_grad(ia)) tp.grad(ia).noalias() += g * tp.value(ib).transpose();
            if (tp.requires_grad(ib)) tp.grad(ib).noalias() += tp.value(ia).transpose() * g;
          })};
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  const int ia = a.id(), ib = b.id();
  Mat v = a.value() * b.value().transpose();
  return {&t, t.push(std::move(v), any_grad(a, b), [ia, ib](Tape& tp, int self) {
            const Mat g = tp.grad(self);
            if (tp.requires_grad(ia)) tp.grad(ia).noalias() += g * tp.value(ib);
            if (tp.requires_grad(ib)) tp.grad(ib).noalias() += g.transpose() * tp.value(ia);
          })};
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "add");
  const int ia = a.id(), ib = b.id();
  return {&t, t.push(a.value() + b.value(), any_grad(a, b), [ia, ib](Tape& tp, int self) {
            const Mat g = tp.grad(self);
            if (tp.requires_grad(ia)) tp.grad(ia) += g;
            if (tp.requires_grad(ib)) tp.grad(ib) += g;
          })};
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  const int ia = a.id(), ib = b.id();
  return {&t, t.push(a.value() - b.value(), any_grad(a, b), [ia, ib](Tape& tp, int self) {
            const Mat g = tp.grad(self);
            if (tp.requires_grad(ia)) tp.grad(ia) += g;
            if (tp.requires_grad(ib)) tp.grad(ib) -= g;
          })};
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "hadamard");
  const int ia = a.id(), ib = b.id();
  Mat v = a.value().cwiseProduct(b.value());
  return {&t, t.push(std::move(v), any_grad(a, b), [ia, ib](Tape& tp, int self) {
            const Mat g = tp.grad(self);
            if (tp.requires_grad(ia)) tp.grad(ia) += g.cwiseProduct(tp.value(ib));
            if (tp.requires_grad(ib)) tp.grad(ib) += g.cwiseProduct(tp.value(ia));
          })};
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return {&t, t.push(a.value() * s, any_grad(a), [ia, s](Tape& tp, int self) { tp.grad(ia) += s * tp.grad(self); })};
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: bad row shape");
  const int ia = a.id(), ir = row.id();
  Mat v = a.value().rowwise() + row.value().row(0);
  return {&t, t.push(std::move(v), any_grad(a, row), [ia, ir](Tape& tp, int self) {
            const Mat g = tp.grad(self);
            if (tp.requires_grad(ia)) tp.grad(ia) += g;
            if (tp.requires_grad(ir)) tp.grad(ir) += g.colwise().sum();
          })};
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Mat v = a.value().array().tanh().matrix();
  return {&t, t.push(std::move(v), any_grad(a), [ia](Tape& tp, int self) {
            const Mat& y = tp.value(self);
            tp.grad(ia).array() += tp.grad(self).array() * (1.0 - y.array().square());
          })};
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Mat v = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return {&t, t.push(std::move(v), any_grad(a), [ia](Tape& tp, int self) {
            const Mat& y = tp.value(self);
            tp.grad(ia).array() += tp.grad(self).array() * y.array() * (1.0 - y.array());
          })};
}

Var exp(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Mat v = a.value().array().exp().matrix();
  return {&t, t.push(std::move(v), any_grad(a), [ia](Tape& tp, int self) {
            tp.grad(ia).array() += tp.grad(self).array() * tp.value(self).array();
          })};
}

Var log(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Mat v = a.value().array().log().matrix();
  return {&t, t.push(std::move(v), any_grad(a), [ia](Tape& tp, int self) {
            tp.grad(ia).array() += tp.grad(self).array() / tp.value(ia).array();
          })};
}

Var square(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Mat v = a.value().array().square().matrix();
  return {&t, t.push(std::move(v), any_grad(a), [ia](Tape& tp, int self) {
            tp.grad(ia).array() += 2.0 * tp.grad(self).array() * tp.value(ia).array();
          })};
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Mat v = a.value().cwiseMax(lo).cwiseMin(hi);
  return {&t, t.push(std::move(v), any_grad(a), [ia, lo, hi](Tape& tp, int self) {
            const Mat& x = tp.value(ia);
            const Mat& g = tp.grad(self);
            Mat& gx = tp.grad(ia);
            for (Eigen::Index i = 0; i < x.size(); ++i) {
              if (x(i) > lo && x(i) < hi) gx(i) += g(i);
            }
          })};
}

Var minimum(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "minimum");
  const int ia = a.id(), ib = b.id();
  Mat v = a.value().cwiseMin(b.value());
  return {&t, t.push(std::move(v), any_grad(a, b), [ia, ib](Tape& tp, int self) {
            const Mat& x = tp.value(ia);
            const Mat& y = tp.value(ib);
            const Mat g = tp.grad(self);
            for (Eigen::Index i = 0; i < x.size(); ++i) {
              // ties route to the first argument
              if (x(i) <= y(i)) {
                if (tp.requires_grad(ia)) tp.grad(ia)(i) += g(i);
              } else if (tp.requires_grad(ib)) {
                tp.grad(ib)(i) += g(i);
              }
            }
          })};
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Mat v = a.value();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    v.row(r).array() -= v.row(r).maxCoeff();
    v.row(r) = v.row(r).array().exp().matrix();
    v.row(r) /= v.row(r).sum();
  }
  return {&t, t.push(std::move(v), any_grad(a), [ia](Tape& tp, int self) {
            const Mat& y = tp.value(self);
            const Mat& g = tp.grad(self);
            const Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
            tp.grad(ia).array() += y.array() * (g.colwise() - dots).array();
          })};
}

Var masked_softmax(Var row, const std::vector<bool>& allowed) {
  Tape& t = *row.tape();
  if (row.rows() != 1 || static_cast<std::size_t>(row.cols()) != allowed.size())
    throw std::invalid_argument("masked_softmax: mask size mismatch");
  const int ia = row.id();
  const Mat& x = row.value();
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (allowed[j]) mx = std::max(mx, x(0, j));
  }
  if (!std::isfinite(mx)) throw std::invalid_argument("masked_softmax: every entry masked");
  Mat v = Mat::Zero(1, x.cols());
  double z = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (allowed[j]) {
      v(0, j) = std::exp(x(0, j) - mx);
      z += v(0, j);
    }
  }
  v /= z;
  return {&t, t.push(std::move(v), any_grad(row), [ia](Tape& tp, int self) {
            const Mat& y = tp.value(self);
            const Mat& g = tp.grad(self);
            const double dot = g.cwiseProduct(y).sum();
            tp.grad(ia).array() += y.array() * (g.array() - dot);
          })};
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& t = same_tape(x, gamma);
  const Eigen::Index c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c)
    throw std::invalid_argument("layer_norm: bad affine shape");
  const Mat& xv = x.value();
  Mat xhat(xv.rows(), c);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Mat v = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  v.rowwise() += beta.value().row(0);
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return {&t, t.push(std::move(v), any_grad(x) || any_grad(gamma) || any_grad(beta),
                     [ix, ig, ib, xhat, inv_std](Tape& tp, int self) {
                       const Mat g = tp.grad(self);
                       if (tp.requires_grad(ig)) tp.grad(ig) += g.cwiseProduct(xhat).colwise().sum();
                       if (tp.requires_grad(ib)) tp.grad(ib) += g.colwise().sum();
                       if (tp.requires_grad(ix)) {
                         const Mat dxhat = (g.array().rowwise() * tp.value(ig).row(0).array()).matrix();
                         const double n = static_cast<double>(dxhat.cols());
                         for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                           const double m1 = dxhat.row(r).sum() / n;
                           const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).sum() / n;
                           tp.grad(ix).row(r).array() +=
                               inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                         }
                       }
                     })};
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.rows() != b.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  const Eigen::Index ca = a.cols(), cb = b.cols();
  Mat v(a.rows(), ca + cb);
  v << a.value(), b.value();
  const int ia = a.id(), ib = b.id();
  return {&t, t.push(std::move(v), any_grad(a, b), [ia, ib, ca, cb](Tape& tp, int self) {
            const Mat& g = tp.grad(self);
            if (tp.requires_grad(ia)) tp.grad(ia) += g.leftCols(ca);
            if (tp.requires_grad(ib)) tp.grad(ib) += g.rightCols(cb);
          })};
}

Var gather_rows(Var a, const std::vector<int>& rows) {
  Tape& t = *a.tape();
  Mat v(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw std::out_of_range("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  }
  const int ia = a.id();
  return {&t, t.push(std::move(v), any_grad(a), [ia, rows](Tape& tp, int self) {
            const Mat& g = tp.grad(self);
            Mat& ga = tp.grad(ia);
            for (std::size_t i = 0; i < rows.size(); ++i) ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
          })};
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape();
  if (start < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols: range out of bounds");
  const int ia = a.id();
  return {&t, t.push(a.value().middleCols(start, count), any_grad(a), [ia, start, count](Tape& tp, int self) {
            tp.grad(ia).middleCols(start, count) += tp.grad(self);
          })};
}

Var element(Var a, Eigen::Index r, Eigen::Index c) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Mat v(1, 1);
  v(0, 0) = a.value()(r, c);
  return {&t, t.push(std::move(v), any_grad(a), [ia, r, c](Tape& tp, int self) {
            tp.grad(ia)(r, c) += tp.grad(self)(0, 0);
          })};
}

Var sum(Var a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return {&t, t.push(std::move(v), any_grad(a), [ia](Tape& tp, int self) {
            tp.grad(ia).array() += tp.grad(self)(0, 0);
          })};
}

Var entropy(Var probs) {
  Tape& t = *probs.tape();
  const int ia = probs.id();
  const Mat& p = probs.value();
  Mat v(1, 1);
  v(0, 0) = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) v(0, 0) -= p(i) * std::log(p(i));
  }
  return {&t, t.push(std::move(v), any_grad(probs), [ia](Tape& tp, int self) {
            const Mat& x = tp.value(ia);
            const double g = tp.grad(self)(0, 0);
            Mat& gx = tp.grad(ia);
            for (Eigen::Index i = 0; i < x.size(); ++i) {
              if (x(i) > 0.0) gx(i) -= g * (std::log(x(i)) + 1.0);
            }
          })};
}

}  // namespace maipp::nn
