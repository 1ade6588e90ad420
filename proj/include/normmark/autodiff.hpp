#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace normmark::ad {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// A trainable tensor. Vectors are stored as n x 1 matrices so the optimizer
// can treat everything uniformly.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  bool encoder_group = false;

  Param(std::string name_, int rows, int cols, bool encoder = false)
      : name(std::move(name_)),
        value(Mat::Zero(rows, cols)),
        grad(Mat::Zero(rows, cols)),
        encoder_group(encoder) {}

  int size() const { return static_cast<int>(value.size()); }
  void zero_grad() { grad.setZero(); }
};

// Handle to a node on a Tape.
struct Var {
  int i = -1;
  bool valid() const { return i >= 0; }
};

// Reverse-mode tape over vector-valued nodes. Node values are computed
// eagerly; backward() runs the recorded closures in reverse creation order.
// Parameters live outside the tape and accumulate into Param::grad.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // -- leaves ---------------------------------------------------------------
  Var input(Vec v);                 // constant, no parents
  Var vec(Param& p);                // whole n x 1 parameter
  Var row(Param& p, int r);         // one row of a parameter matrix

  // -- linear ---------------------------------------------------------------
  Var matvec(Param& w, Var x);      // w.value * x
  Var matvec_t(Param& w, Var x);    // w.value^T * x   (soft embedding lookups)
  Var affine(Param& w, Var x, Param& b);  // w * x + b

  // -- arithmetic -----------------------------------------------------------
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);           // elementwise
  Var add_n(const std::vector<Var>& xs);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var bsub(Var a, Var s);           // a - s[0] broadcast, s is 1-dim
  Var scale_byv(Var a, Var s);      // a * s[0],          s is 1-dim

  // -- elementwise nonlinear ------------------------------------------------
  Var tanh_(Var a);
  Var sigmoid_(Var a);
  Var exp_(Var a);
  Var log_(Var a);
  Var sqrt_(Var a);
  Var square(Var a);
  Var inv(Var a);
  Var clamp(Var a, double lo, double hi);

  // -- reductions / reshaping -----------------------------------------------
  Var sum(Var a);                   // 1-dim
  Var dot(Var a, Var b);            // 1-dim
  Var pick(Var a, int k);           // 1-dim, selects component k
  Var concat(const std::vector<Var>& xs);
  Var slice(Var a, int start, int len);

  // -- softmax family ---------------------------------------------------------
  Var softmax(Var a);
  Var log_softmax(Var a);

  // -- fused attention helpers ------------------------------------------------
  Var dots(Var q, const std::vector<Var>& keys);            // [dot(q,k_u)]_u
  Var weighted_sum(const std::vector<Var>& xs, Var w);      // sum_u w_u x_u

  // Forward value is one-hot at argmax (ties to the lowest index); the
  // gradient passes through unchanged.
  Var one_hot_st(Var soft);

  // -- access -----------------------------------------------------------------
  const Vec& value(Var v) const { return nodes_[v.i].value; }
  const Vec& grad_of(Var v) const { return nodes_[v.i].grad; }
  double scalar(Var v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. `loss` must be
  // 1-dimensional.
  void backward(Var loss);

 private:
  struct Node {
    Vec value;
    Vec grad;
    std::function<void()> back;  // empty for leaves
  };

  std::vector<Node> nodes_;

  Var push(Vec value, std::function<void()> back = nullptr);
  Vec& g(Var v) { return nodes_[v.i].grad; }
  const Vec& v(Var x) const { return nodes_[x.i].value; }

  friend struct TapeTestAccess;
};

// Numerically stable softmax / log-softmax on plain vectors.
Vec softmax_value(const Vec& logits);
Vec log_softmax_value(const Vec& logits);
int argmax_index(const Vec& v);  // ties break to the lowest index

}  // namespace normmark::ad
