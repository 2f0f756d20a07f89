// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over an eager tape.
//
// A Graph is a topologically ordered list of op records: each op is computed
// immediately and its saved activation is kept for the backward sweep. The op
// set is closed; shape rules per op (rules without broadcasting, rank-2
// unless noted):
//
//   matmul        [a x b] . [b x c] -> [a x c]
//   add, mul      elementwise, identical shapes
//   scale         multiply by a compile-time constant
//   concat        axis 0 stacks rows, axis 1 joins columns
//   slice         contiguous [begin, end) range along an axis
//   transpose     [r x c] -> [c x r]
//   sum_all/mean_all        -> [1 x 1]
//   mean_rows     [t x d] -> [1 x d] column means
//   softmax_rows  per-row softmax over the last axis
//   layer_norm_rows(x, gain, bias)  per-row normalization, gain/bias [1 x d]
//   gelu, relu, sigmoid, tanh       elementwise
//   mse_loss      mean squared error -> [1 x 1]
//   reshape       same element count, row-major order preserved
//   repeat_rows   [1 x d] -> [n x d]
//   gather_cols   [r x n] -> [r x m] fixed column index list
//   pad_cols      [r x m] -> [r x L] zero tail
//   power_normalize  per row: x * sqrt(n) / |x|, unit average power
//
// backward(loss) requires a scalar loss and visits every node exactly once,
// returning gradients for every node whose subtree touches a requires_grad
// leaf; non-participating requires_grad leaves get exact zero tensors.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "psic/tensor.hpp"

namespace psic::ad {

using NodeId = int;

enum class OpKind : std::uint8_t {
    Leaf,
    Matmul,
    Add,
    Mul,
    Scale,
    Concat,
    Slice,
    Transpose,
    SumAll,
    MeanAll,
    MeanRows,
    SoftmaxRows,
    LayerNormRows,
    Gelu,
    Relu,
    Sigmoid,
    Tanh,
    MseLoss,
    Reshape,
    RepeatRows,
    GatherCols,
    PadCols,
    PowerNorm,
};

const char* op_name(OpKind k);

struct Node {
    OpKind op = OpKind::Leaf;
    std::array<NodeId, 3> in{-1, -1, -1};
    int n_in = 0;
    Tensor value;
    bool requires_grad = false;
    // op attributes
    int axis = 0;
    int a0 = 0;  // slice begin / repeat count / pad length
    int a1 = 0;  // slice end
    double c = 0.0;
    std::vector<int> idx;
    // saved layer_norm statistics, one entry per row
    std::vector<double> mu, inv_sigma;
};

class Graph {
  public:
    NodeId input(const Tensor& t);
    // Leaf that never takes gradient (targets, noise draws, masks).
    NodeId constant(Tensor t);

    const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    bool requires_grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Drop every node recorded after the watermark `n`; earlier nodes (and
    // their ids) stay valid. Lets inference loops rebuild only the
    // sample-dependent tail of a graph with bound parameters.
    void truncate(std::size_t n) {
        if (n > nodes_.size()) throw std::invalid_argument("graph: truncate beyond end");
        nodes_.resize(n);
    }

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId concat(NodeId a, NodeId b, int axis);
    NodeId slice(NodeId a, int axis, int begin, int end);
    NodeId transpose(NodeId a);
    NodeId sum_all(NodeId a);
    NodeId mean_all(NodeId a);
    NodeId mean_rows(NodeId a);
    NodeId softmax_rows(NodeId a);
    NodeId layer_norm_rows(NodeId x, NodeId gain, NodeId bias);
    NodeId gelu(NodeId a);
    NodeId relu(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId tanh_(NodeId a);
    NodeId mse_loss(NodeId a, NodeId b);
    NodeId reshape(NodeId a, Shape target);
    NodeId repeat_rows(NodeId a, int n);
    NodeId gather_cols(NodeId a, std::vector<int> indices);
    NodeId pad_cols(NodeId a, int len);
    NodeId power_normalize(NodeId a);

    // Gradient of a scalar loss w.r.t. every participating node. Entries for
    // nodes outside the loss's subtree are empty tensors, except
    // requires_grad leaves, which are materialized as zeros.
    std::vector<Tensor> backward(NodeId loss) const;

  private:
    NodeId push(Node n);
    const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }

    std::vector<Node> nodes_;
};

// Max relative error between analytic gradients and central finite
// differences, over every coordinate of every leaf:
//   |analytic - numeric| / max(1, |analytic|, |numeric|)
// `build` must be deterministic; it receives the graph plus one node per
// leaf (all marked requires_grad) and returns the scalar loss node.
double grad_check(const std::function<NodeId(Graph&, const std::vector<NodeId>&)>& build,
                  const std::vector<Tensor>& leaves, double eps);

}  // namespace psic::ad
