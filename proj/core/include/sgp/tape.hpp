#pragma once

#include <functional>
#include <vector>

#include "sgp/params.hpp"
#include "sgp/tensor.hpp"

namespace sgp::num {

class Tape;

/// Handle to a tensor recorded on a tape. Cheap to copy; valid for the
/// lifetime of its tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Reverse-mode tape. Operations append nodes in execution order, which is
/// by construction a topological order, so backward() is a single reverse
/// sweep visiting each node exactly once. A tape and its tensors form one
/// isolated unit; distinct tapes share no mutable state.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf with no gradient.
  Var constant(Tensor t);
  /// Differentiable leaf not bound to a parameter (gradient kept on the tape).
  Var input(Tensor t);
  /// Differentiable leaf bound to a parameter; backward() accumulates into
  /// p.grad. The parameter must outlive the tape.
  Var param(Param& p);

  const Tensor& val(Var v) const;
  /// Gradient of a leaf/interior node after backward(). Zero tensor when the
  /// node was not reached by the sweep.
  const Tensor& grad(Var v);

  /// Runs the reverse sweep from a scalar loss. A second call on the same
  /// tape is rejected with ContractError (gradients accumulate per step and
  /// are reset explicitly by the caller; double-backward is unsupported).
  void backward(Var loss);

  bool backward_has_run() const { return backward_run_; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // --- internal plumbing used by the op implementations ---
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily
    bool needs_grad = false;
    bool grad_alloc = false;
    Param* bound = nullptr;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  int push(Tensor value, bool needs_grad, std::function<void(Tape&)> back);
  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  Tensor& grad_buf(int id);
  bool needs(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

 private:
  std::vector<Node> nodes_;
  bool backward_run_ = false;
};

// ---- primitive operations -------------------------------------------------
// All ops validate shapes (ContractError) and check outputs for finiteness
// (NumericError). Gradients flow to every differentiable input.

Var add(Var a, Var b);                   // elementwise, same shape
Var sub(Var a, Var b);
Var mul(Var a, Var b);                   // elementwise
Var scale(Var a, double k);
Var neg(Var a);

Var matmul_nt(Var a, Var b);             // (m,k) x (n,k) -> (m,n) = A B^T
Var matvec(Var w, Var x);                // (m,n) x (n) -> (m)
Var vecmat(Var x, Var a);                // (m) x (m,n) -> (n)

Var relu(Var a);
Var sigmoid(Var a);
Var tanh_op(Var a);

Var sum(Var a);                          // -> scalar
Var dot(Var u, Var v);                   // vectors -> scalar
Var pick(Var v, int index);              // vector element -> scalar
Var row(Var m, int r);                   // matrix row -> vector
Var rows_gather(Var m, std::vector<int> ids);       // -> (|ids|, d)
Var stack_scalars(const std::vector<Var>& xs);      // -> vector
Var stack_rows(const std::vector<Var>& rows);       // -> matrix
Var concat(Var u, Var v);                // vectors -> vector
Var add_rowwise(Var m, Var b);           // (n,d) + (d) broadcast over rows

/// Mean over in-list rows per output row; empty lists contribute zero rows.
Var neighbor_mean(Var m, std::vector<std::vector<int>> lists);

/// Arithmetic mean over the rows of a matrix (graph-level pooling).
Var pool_mean(Var m);

/// Temperature softmax with max-subtraction. tau must be > 0.
Var softmax(Var v, double tau);
/// Temperature log-softmax with max-subtraction. tau must be > 0.
Var log_softmax(Var v, double tau = 1.0);

/// cosine_similarity(u, v) = u.v / (|u||v|), in [-1, 1]. A zero-norm input
/// raises NumericError (explicit zero-vector error, never a silent 0).
Var cosine_similarity(Var u, Var v);

/// Mean squared error between two same-shape tensors -> scalar.
Var mse(Var a, Var b);

/// Triaffine contraction: t_b = sum_{a,c} [u;1]_a W[a,b,c] [p;1]_c with
/// W of shape (d+1, d, d+1) and u, p of length d.
Var triaffine(Var w, Var u, Var p);

// Raw (tape-free) counterparts used on inference paths.
namespace raw {
Tensor matvec(const Tensor& w, const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor tanh_t(const Tensor& a);
double dot(const Tensor& u, const Tensor& v);
double cosine(const Tensor& u, const Tensor& v);
Tensor softmax(const Tensor& v, double tau);
}  // namespace raw

}  // namespace sgp::num
