// Copyright 2026 The ovseg Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ovseg/types.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace ovseg::ag {

// Reverse-mode autodiff over dense Eigen matrices. Nodes are owned by a
// Graph (tape); backward() walks the tape in reverse creation order.
class Graph;

struct Node {
  Graph* graph = nullptr;
  Mat val;
  Mat grad;  // lazily allocated
  bool requires_grad = false;
  std::function<void(const Node&)> backward_fn;  // accumulates into parents

  void add_grad(const Mat& g) {
    if (grad.size() == 0) grad = Mat::Zero(val.rows(), val.cols());
    grad += g;
  }
};

class Graph {
 public:
  Node* leaf(Mat value, bool requires_grad = false);
  Node* make(Mat value, bool requires_grad, std::function<void(const Node&)> fn);

  // Seeds `root` (must be 1x1) with grad 1 and propagates.
  void backward(Node* root);

  size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
};

// ---- elementwise / structural ops ----
Node* add(Node* a, Node* b);
Node* sub(Node* a, Node* b);
Node* cmul(Node* a, Node* b);
Node* scale(Node* a, double c);
Node* add_const(Node* a, const Mat& c);
Node* add_row_broadcast(Node* a, Node* row);  // row: 1 x C
Node* matmul(Node* a, Node* b);
Node* transpose(Node* a);
Node* relu(Node* a);
Node* sigmoid(Node* a);
Node* exp(Node* a);
Node* concat_rows(const std::vector<Node*>& parts);
Node* slice_rows(Node* a, int start, int count);
Node* select_rows(Node* a, const std::vector<int>& idx);
Node* sum_all(Node* a);
Node* mean_all(Node* a);
// s: 1x1 node; result = s * a, grads to both.
Node* scale_by(Node* s, Node* a);

// Rowwise softmax with optional constant additive mask (same shape).
Node* softmax_rows(Node* a, const Mat* add_mask = nullptr);
Node* layernorm_rows(Node* a, Node* gamma, Node* beta, double eps = 1e-5);
Node* l2_normalize_rows(Node* a, double eps = 1e-12);

// Patch extraction for im2col convolutions: out(r, t*C + c) =
// in(row_index[r*taps + t], c). Indices must be valid (clamp padding is
// resolved by the caller).
Node* gather_patches(Node* a, std::shared_ptr<const std::vector<int>> row_index, int taps);

// Bilinear spatial resize of a (h*w) x C node via a precomputed plan.
Node* interp(Node* a, std::shared_ptr<const InterpPlan> plan);

// ---- losses (means over all entries / rows) ----
Node* bce_with_logits_mean(Node* logits, const Mat& targets);
Node* dice_loss_mean(Node* logits, const Mat& targets, double eps = 1.0);
Node* cross_entropy_logits_mean(Node* logits, const std::vector<int>& targets);

}  // namespace ovseg::ag
