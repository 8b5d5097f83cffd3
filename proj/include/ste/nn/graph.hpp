#pragma once

#include <functional>
#include <vector>

#include "ste/exec.hpp"
#include "ste/nn/params.hpp"
#include "ste/nn/tensor.hpp"

namespace ste::nn {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Every op appends a node holding its value; backward()
// walks the tape once from a scalar and accumulates into parameter grads.
// Reductions and dot products over a layer's inputs accumulate in double.
template <class Real>
class Graph {
 public:
  using T = Tensor<Real>;

  explicit Graph(Exec exec = Exec::parallel) : exec_(exec) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(T value);
  Var param(Param<Real>& p);
  // Same value, but gradients stop here.
  Var detach(Var x);

  // x [N,Ci,H,W], w [Co,Ci,k,k], optional b [Co]; zero padding k/2.
  Var conv2d(Var x, Var w, Var b, int stride);
  Var upsample_nearest(Var x, int factor);
  Var leaky_relu(Var x, double slope = 0.2);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var tanh(Var x);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var affine(Var x, double scale, double shift);  // scale * x + shift
  Var pow(Var x, double p);                      // x >= 0 when p is not an integer
  Var concat(Var a, Var b);                      // along dim 1

  Var sum(Var x);   // -> shape {1}
  Var mean(Var x);  // -> shape {1}
  Var l1(Var a, Var b);  // mean |a - b|, subgradient 0 at ties

  Var matmul(Var a, Var b);        // [M,K] x [K,N]
  Var add_rowvec(Var a, Var b);    // [M,N] + [N]
  Var slice_cols(Var a, int begin, int end);
  Var log_softmax(Var a);          // per row of [M,N]
  Var pick(Var a, const std::vector<int>& idx);       // [M,N] -> [M], a[m, idx[m]]
  Var embedding(Var table, const std::vector<int>& idx);  // [V,D] -> [M,D]
  // Gates packed i,f,g,o. Returns [B, 2H] = (h', c').
  Var lstm_cell(Var x, Var h, Var c, Var wx, Var wh, Var b);

  const T& value(Var v) const { return nodes_.at(v.id).value; }
  Real scalar(Var v) const;
  const T& grad(Var v) const { return nodes_.at(v.id).grad; }
  std::size_t size() const { return nodes_.size(); }
  Exec exec() const { return exec_; }

  // Seeds d(loss)/d(loss) = 1 and propagates. Loss must have one element.
  void backward(Var loss);
  // Drops node gradients so a second loss on the same tape starts clean.
  // Parameter grads are left alone.
  void clear_grads();

 private:
  struct Node {
    T value;
    T grad;
    bool needs_grad = false;
    Param<Real>* param = nullptr;
    std::function<void()> back;
  };

  Var push(T value, bool needs_grad);
  Node& node(Var v) { return nodes_.at(v.id); }
  T& g(Var v);  // gradient buffer, allocated on first use
  void check_finite(const T& t, const char* op) const;
  bool any_grad(std::initializer_list<Var> vs) const;

  Exec exec_;
  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace ste::nn
