#pragma once

// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// A `Tape` records every operation applied to `Var` handles. Parameters are
// leaves bound to entries of a `ParamSet`; after `backward()` their
// gradients can be accumulated into another `ParamSet` of the same layout.
// Row-vector convention throughout: features are rows, `x * W + b`.

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace maipp::nn {

using Mat = Eigen::MatrixXd;

/// Ordered collection of named tensors.
class ParamSet {
 public:
  void add(std::string name, Mat value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Mat& operator[](std::size_t i) { return values_[i]; }
  const Mat& operator[](std::size_t i) const { return values_[i]; }
  Mat& at(const std::string& name) { return values_[index(name)]; }
  const Mat& at(const std::string& name) const { return values_[index(name)]; }

  std::size_t scalar_count() const;
  ParamSet zeros_like() const;
  bool all_finite() const;

  /// this += scale * other (same layout).
  void axpy(double scale, const ParamSet& other);

 private:
  std::vector<std::string> names_;
  std::vector<Mat> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  Var constant(Mat value);
  /// Leaf bound to params[index]; repeated calls return the same node.
  Var param(const ParamSet& params, std::size_t index);
  Var param(const ParamSet& params, const std::string& name) { return param(params, params.index(name)); }

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and propagates.
  void backward(Var out);

  /// grads[p] += scale * dL/dparam for every parameter leaf on this tape.
  void accumulate(ParamSet& grads, double scale = 1.0) const;

  const Mat& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  Mat& grad(int id);

  int push(Mat value, bool requires_grad, Backward backward);

 private:
  struct Node {
    Mat value;
    const Mat* ref = nullptr;
    Mat grad;
    bool requires_grad = false;
    int param = -1;
    Backward backward;
  };
  std::vector<Node> nodes_;
  const ParamSet* params_ = nullptr;
  std::unordered_map<std::size_t, int> param_nodes_;
};

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// Adds a 1 x c row to every row of a.
Var add_row(Var a, Var row);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var clamp(Var a, double lo, double hi);
Var minimum(Var a, Var b);
/// Row-wise softmax.
Var softmax_rows(Var a);
/// Softmax of a single row with masked-out entries forced to exactly zero.
Var masked_softmax(Var row, const std::vector<bool>& allowed);
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var concat_cols(Var a, Var b);
Var gather_rows(Var a, const std::vector<int>& rows);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var element(Var a, Eigen::Index r, Eigen::Index c);
Var sum(Var a);
/// -sum p log p over the strictly positive entries of a probability row.
Var entropy(Var probs);

}  // namespace maipp::nn
