#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "medtag/rng.hpp"
#include "medtag/tensor.hpp"

namespace medtag {

/// A named trainable tensor. Gradients accumulate across backward passes;
/// callers zero them between optimizer steps.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape)) {}
};

/// Owns parameters by name. Iteration is in lexicographic name order, so
/// optimizer sweeps and checkpoints are deterministic.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Parameter& create(const std::string& name, Tensor init);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  void zero_grads();
  std::size_t total_values() const;
  std::size_t count() const { return params_.size(); }

 private:
  std::map<std::string, std::unique_ptr<Parameter>> params_;
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  int id = -1;
  Tape* tape = nullptr;
};

/// Reverse-mode tape. Operations append nodes in execution order; backward()
/// walks the recording in reverse and accumulates gradients into every
/// Parameter leaf that was touched.
class Tape {
 public:
  explicit Tape(bool training = false, Rng* dropout_rng = nullptr)
      : training_(training), dropout_rng_(dropout_rng) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Constant leaf.
  Var input(Tensor value);
  /// Differentiable leaf bound to a parameter (value copied onto the tape).
  /// Binding the same parameter again returns the existing node.
  Var param(Parameter& p);

  /// Backpropagate from a scalar loss. Throws if nothing was recorded or the
  /// loss is not a scalar on this tape.
  void backward(Var loss);

  const Tensor& val(Var v) const;
  const Tensor& grad(Var v) const;

  bool training() const { return training_; }
  Rng& dropout_rng();

  std::size_t size() const { return nodes_.size(); }

  // -- graph construction interface used by the op implementations --
  using BackFn = std::function<void(Tape&, int)>;
  int push(Tensor value, std::vector<int> parents, BackFn back);
  Tensor& value_at(int id) { return nodes_[id].value; }
  Tensor& grad_at(int id) { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> parents;
    BackFn back;
    Parameter* bound = nullptr;
  };
  std::vector<Node> nodes_;
  std::map<Parameter*, int> bound_ids_;
  bool training_ = false;
  Rng* dropout_rng_ = nullptr;
};

// ---------------------------------------------------------------------------
// Kernels. Every op validates shapes and throws std::invalid_argument naming
// the operation and the offending shapes.
// ---------------------------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double c);
Var add_rowwise(Var m, Var v);  // (r x c) + (c,), v added to every row

Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
Var matvec(Var w, Var x);  // (m x n) * (n,) -> (m,)

Var concat(Var a, Var b);                       // 1-D
Var concat(const std::vector<Var>& parts);      // 1-D
Var concat_cols(const std::vector<Var>& parts); // 2-D, equal row counts
Var stack_rows(const std::vector<Var>& rows);   // 1-D rows -> matrix
Var row(Var m, int r);                          // matrix row -> 1-D
Var col(Var m, int c);                          // matrix column -> 1-D
Var slice(Var a, int start, int len);           // 1-D
Var slice_cols(Var m, int start, int len);

/// Gathers rows of a matrix; repeated indices accumulate gradient.
/// embedding_lookup is this op applied to an embedding table.
Var gather_rows(Var m, const std::vector<int>& idx);

Var sum(Var a);               // -> scalar
Var pick(Var a, int index);   // flat index -> scalar

Var tanh(Var a);
Var sigmoid(Var a);
Var gelu(Var a);

Var softmax(Var a);  // 1-D, max-subtracted
/// Row-wise softmax; when keep is given (one flag per column), masked-out
/// columns get probability zero and rows normalize over kept columns only.
Var softmax_rows(Var m, const std::vector<unsigned char>* keep = nullptr);
Var log_softmax_rows(Var m);
Var log_sum_exp(Var a);  // 1-D -> scalar, max-subtracted

/// Inverted dropout: active only on training tapes, retained activations are
/// scaled by 1/(1-p). Identity when p == 0 or the tape is in eval mode.
Var dropout(Var a, double p);

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-12);

inline Var embedding_lookup(Var table, const std::vector<int>& ids) { return gather_rows(table, ids); }

// ---------------------------------------------------------------------------
// Initializers
// ---------------------------------------------------------------------------

/// Uniform in +-sqrt(6/(fan_in+fan_out)).
Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, Rng& rng);
/// Normal(0, stddev); used for transformer weights (stddev 0.02).
Tensor normal_init(std::vector<int> shape, double stddev, Rng& rng);

}  // namespace medtag
