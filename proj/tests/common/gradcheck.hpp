#pragma once

// Random small networks built from every differentiable primitive, checked against
// central finite differences. Shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <cstdint>

#include "ecgxai/autodiff.hpp"

namespace gradcheck {

using ecgxai::ad::Graph;
using ecgxai::ad::Padding;
using ecgxai::ad::Tensor;
using ecgxai::ad::Var;

struct Net {
  std::size_t channels = 3;
  std::size_t hidden = 4;
  std::size_t length = 16;
  std::size_t kernel1 = 3;
  std::size_t kernel2 = 3;
  std::size_t stride2 = 2;
  std::uint64_t dropout_seed = 0;
};

// leaves: x, conv1, gamma, beta, conv2, W, b
inline std::vector<Tensor> random_leaves(const Net& net, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  auto fill = [&](ecgxai::ad::Shape shape, double scale, double shift = 0.0) {
    Tensor t(shape);
    for (auto& v : t.data()) v = shift + scale * g(rng);
    return t;
  };
  return {fill({2, net.channels, net.length}, 1.0),
          fill({net.hidden, net.channels, net.kernel1}, 0.5),
          fill({net.hidden}, 0.2, 1.0),
          fill({net.hidden}, 0.2),
          fill({net.hidden, net.hidden, net.kernel2}, 0.5),
          fill({2, net.hidden}, 0.5),
          fill({2}, 0.1)};
}

struct Built {
  double loss = 0.0;
  double min_relu_margin = 0.0;
};

// Builds the network on `graph`, registering leaves into `vars`.
inline Built build(Graph& graph, const Net& net, const std::vector<Tensor>& leaves, std::vector<Var>& vars) {
  vars.clear();
  vars.push_back(graph.input(leaves[0], true));
  for (std::size_t i = 1; i < leaves.size(); ++i) vars.push_back(graph.parameter(leaves[i]));
  ecgxai::ad::BatchNormState bn{Tensor({net.hidden}, 0.0), Tensor({net.hidden}, 1.0)};
  Var h = ecgxai::ad::conv1d(vars[0], vars[1], 1, Padding::replication((net.kernel1 - 1) / 2));
  h = ecgxai::ad::batch_norm(h, vars[2], vars[3], bn, true);
  double margin = 1e9;
  for (double v : h.value().data()) margin = std::min(margin, std::abs(v));
  h = ecgxai::ad::relu(h);
  Var skip = h;
  h = ecgxai::ad::conv1d(h, vars[4], 1, Padding::replication((net.kernel2 - 1) / 2));
  h = ecgxai::ad::tanh(h);
  h = ecgxai::ad::add(ecgxai::ad::mul(h, skip), ecgxai::ad::scale(skip, 0.5));
  h = ecgxai::ad::conv1d(h, vars[4], net.stride2, Padding::none());
  h = ecgxai::ad::dropout(h, 0.25, true, net.dropout_seed, 1);
  h = ecgxai::ad::global_avg_pool(h);
  Var logits = ecgxai::ad::dense(h, vars[5], vars[6]);
  const int labels[] = {0, 1};
  Var loss = ecgxai::ad::softmax_cross_entropy(logits, labels);
  Built out;
  out.loss = loss.value().item();
  out.min_relu_margin = margin;
  graph.backward(loss);
  return out;
}

struct Result {
  double max_rel_error = 0.0;
  bool valid = true;  // false when a relu pre-activation sat too close to its kink
};

// Relative error |a - n| / max(|a|, |n|, floor) over every leaf element.
inline Result check(const Net& net, const std::vector<Tensor>& leaves, double h = 1e-5, double floor = 1e-6) {
  Graph g;
  std::vector<Var> vars;
  const Built base = build(g, net, leaves, vars);
  Result r;
  if (base.min_relu_margin <= 1e-3) {
    r.valid = false;
    return r;
  }
  for (std::size_t leaf = 0; leaf < leaves.size(); ++leaf) {
    const Tensor analytic = g.grad(vars[leaf]);
    for (std::size_t i = 0; i < leaves[leaf].size(); ++i) {
      auto eval = [&](double delta) {
        auto moved = leaves;
        moved[leaf][i] += delta;
        Graph gg;
        std::vector<Var> vv;
        return build(gg, net, moved, vv).loss;
      };
      const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(a - numeric) / denom);
    }
  }
  return r;
}

}  // namespace gradcheck
