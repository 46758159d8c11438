#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "graphda/matrix.hpp"

namespace graphda {

// A named value that persists across training steps. Parameters set
// requires_grad; backward() accumulates into grad until zero_grad().
struct Tensor {
  std::string name;
  Matrix value;
  Matrix grad;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::string n, Matrix v, bool rg = true)
      : name(std::move(n)), value(std::move(v)), requires_grad(rg) {
    if (requires_grad) grad = Matrix(value.rows, value.cols);
  }

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

// Handle to one node of a recorded computation.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double scalar() const { return value().data[0]; }
};

// Records primitive operations in topological order; backward() replays
// them once in reverse, accumulating vector-Jacobian products.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, int self)>;

  // Constant leaf: no gradient flows into it.
  Var input(Matrix value);
  // Leaf bound to an external tensor; backward() adds into tensor.grad.
  Var param(Tensor& tensor);

  Var emit(Matrix value, std::vector<int> parents, Backprop backprop);

  // loss must be scalar (1x1). May be called repeatedly, also with
  // different roots on the same tape; external tensor grads accumulate.
  void backward(Var loss);

  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  // Accumulation target for a parent during backward; no-op sink when the
  // parent does not need gradients.
  Matrix* grad_sink(int id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct NodeRec {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool reachable = false;
    Tensor* bound = nullptr;
    std::vector<int> parents;
    Backprop backprop;
  };
  std::vector<NodeRec> nodes_;
  Matrix discard_;  // sink for gradients of no-grad parents
};

// ---- primitive set -------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
// Row-wise concatenation: each row of the result is [a_row ; b_row].
Var concat_rows(Var a, Var b);
Var relu(Var x);
Var sigmoid(Var x);
Var softmax_rows(Var x);
Var log(Var x);
Var clamp_min(Var x, double lo);
Var mean_rows(Var x);      // n x d -> 1 x d
Var row_sum(Var x);        // n x d -> n x 1
Var sum_all(Var x);        // n x d -> 1 x 1
Var l2_normalize_rows(Var x, double eps = 1e-12);
Var scalar_mul(Var x, double c);
Var scalar_affine(Var x, double a, double b);  // a*x + b elementwise
Var transpose(Var x);
// Forward identity; backward multiplies the incoming gradient by factor.
// A negative factor realizes gradient reversal.
Var grad_scale(Var x, double factor);
// Scores e_i^T W r for each row e_i of e; r is a 1 x k row vector.
Var bilinear(Var e, Var w, Var r);
Var gather_rows(Var x, std::vector<int> positions);
// out_i = sum over (index, weight) of lists[i]; empty list gives a zero row.
Var gather_weighted_sum(Var x,
                        std::vector<std::vector<std::pair<int, double>>> lists);

// ---- checkpoint ----------------------------------------------------------
// Binary format: magic, tensor count, then per tensor a name, a shape
// header, and raw little-endian doubles. Round-trips bit-exactly.

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<const Tensor*>& tensors);
std::map<std::string, Matrix> load_checkpoint(const std::filesystem::path& path);
// Assigns values into the given tensors by name; missing name or shape
// mismatch is an error.
void restore_checkpoint(const std::filesystem::path& path,
                        const std::vector<Tensor*>& tensors);

}  // namespace graphda
