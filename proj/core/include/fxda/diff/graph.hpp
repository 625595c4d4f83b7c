// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fxda/diff/tensor.hpp"

namespace fxda::diff {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the dynamic computation graph. Intermediate nodes are
/// owned by the Var handles that reference them and vanish with the graph;
/// parameter leaves outlive every graph built on top of them.
struct Node {
  Tensor value;
  Tensor grad;
  std::vector<NodePtr> parents;
  // Reads `self.grad` and accumulates into the parents' gradients.
  std::function<void(Node& self)> backward;
  bool requires_grad = false;
  bool leaf = false;

  Tensor& ensure_grad();
};

/// Handle to a graph node. Copying a Var shares the node.
class Var {
 public:
  Var() = default;
  /// Wraps a constant; no gradient flows into it.
  explicit Var(Tensor constant);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// A named trainable (or frozen) tensor with a persistent gradient buffer.
class Parameter {
 public:
  Parameter(std::string name, Tensor init, bool trainable = true);

  const std::string& name() const { return name_; }
  bool trainable() const { return trainable_; }

  Tensor& value() { return node_->value; }
  const Tensor& value() const { return node_->value; }
  Tensor& grad() { return node_->grad; }
  const Tensor& grad() const { return node_->grad; }

  void zero_grad();
  /// Leaf handle for building graphs.
  Var var() const { return Var(node_); }

 private:
  std::string name_;
  bool trainable_;
  NodePtr node_;
};

/// Builds an op node. `backward` is only retained when some input requires
/// a gradient; otherwise the result is a constant.
Var make_op(Tensor value, std::vector<Var> inputs,
            std::function<void(Node& self)> backward);

/// Reverse sweep from a scalar loss. Parameter gradients accumulate across
/// calls until Parameter::zero_grad.
void backward(const Var& loss);

}  // namespace fxda::diff
