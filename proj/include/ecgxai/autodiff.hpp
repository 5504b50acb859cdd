#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ecgxai/tensor.hpp"

namespace ecgxai::ad {

class Graph;

// Handle to a node of a Graph. Valid as long as the graph is alive and not moved.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Tape of tensor operations. Nodes are appended in evaluation order, so parents
// always precede their children and reverse iteration is a topological order.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // A leaf that is differentiated only when requires_grad is set (attribution inputs).
  Var input(Tensor value, bool requires_grad = false);
  // A trainable leaf.
  Var parameter(Tensor value);

  // Appends an operation node. The value must be finite.
  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

  // Reverse sweep from a scalar node. Clears gradients of any previous sweep.
  void backward(Var output);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool trainable(std::size_t id) const { return nodes_[id].trainable; }

  // Gradient of the last backward output with respect to a node; zeros when the
  // node is disconnected from that output.
  Tensor grad(Var v) const;

  // Gradient accumulator of a node, allocated on first use. Null when the node does
  // not require a gradient.
  Tensor* grad_buffer(std::size_t id);
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    bool trainable = false;
  };
  std::vector<Node> nodes_;
};

// ---- operations ----------------------------------------------------------------

enum class PadMode { None, Replication };

struct Padding {
  PadMode mode = PadMode::None;
  std::size_t amount = 0;  // per side

  static Padding none() { return {}; }
  static Padding replication(std::size_t p) { return {PadMode::Replication, p}; }
};

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var relu(Var a);
Var tanh(Var a);
Var sum(Var a);

// x: [C_in][T] or [N][C_in][T]; kernels: [C_out][C_in][K]. Cross-correlation.
Var conv1d(Var x, Var kernels, std::size_t stride, Padding padding);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
};

// x: [N][C][T]. Training mode normalises by batch statistics over (N, T) and updates
// `state`; inference mode uses the running statistics.
Var batch_norm(Var x, Var gamma, Var beta, BatchNormState& state, bool training, double momentum = 0.1,
               double eps = 1e-5);

// [C][T] -> [C], [N][C][T] -> [N][C].
Var global_avg_pool(Var x);

// x: [F] or [N][F]; weight: [O][F]; bias: [O].
Var dense(Var x, Var weight, Var bias);

// Inverted dropout with a counter-based mask: element i of call `counter` is kept
// iff hash(seed, counter, i) >= rate. Identity when not training.
Var dropout(Var x, double rate, bool training, std::uint64_t seed, std::uint64_t counter);

// Row-wise softmax of [K] or [N][K].
Var softmax(Var logits);

// Mean over the batch of -log softmax(logits)[label].
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

// Sum over the batch of column k of a [N][K] (or [K]) node.
Var column_sum(Var x, std::size_t k);

// ---- optimiser -----------------------------------------------------------------

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

// Bias-corrected Adam update, in place.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state, const AdamOptions& options);

// splitmix64 finaliser, used for counter-based random streams.
std::uint64_t mix64(std::uint64_t x);

}  // namespace ecgxai::ad
