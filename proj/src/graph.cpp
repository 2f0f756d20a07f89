// SPDX-License-Identifier: Apache-2.0
//
// Forward evaluation and backward sweep for the autodiff tape.

#include "psic/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace psic::ad {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kLayerNormEps = 1e-12;

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                                shape_str(b.shape));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const std::string& detail) {
    throw std::invalid_argument(std::string(op) + ": " + detail + " for " + shape_str(a.shape));
}

void require_rank2(const char* op, const Tensor& t) {
    if (t.rank() != 2) shape_error(op, t, "rank-2 tensor required");
}

// C += A.B, C [a x c], A [a x b], B [b x c]; plain ikj loops, hot path.
void matmul_acc(const double* a, const double* b, double* c, int ar, int ac, int bc) {
    for (int i = 0; i < ar; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * ac;
        double* crow = c + static_cast<std::size_t>(i) * bc;
        for (int k = 0; k < ac; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<std::size_t>(k) * bc;
            for (int j = 0; j < bc; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A^T.B, A [k x a], B [k x c], C [a x c]
void matmul_at_b_acc(const double* a, const double* b, double* c, int k, int ar, int bc) {
    for (int t = 0; t < k; ++t) {
        const double* arow = a + static_cast<std::size_t>(t) * ar;
        const double* brow = b + static_cast<std::size_t>(t) * bc;
        for (int i = 0; i < ar; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + static_cast<std::size_t>(i) * bc;
            for (int j = 0; j < bc; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A.B^T, A [a x k], B [c x k], C [a x c]
void matmul_a_bt_acc(const double* a, const double* b, double* c, int k, int ar, int br) {
    for (int i = 0; i < ar; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        double* crow = c + static_cast<std::size_t>(i) * br;
        for (int j = 0; j < br; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int t = 0; t < k; ++t) s += arow[t] * brow[t];
            crow[j] += s;
        }
    }
}

}  // namespace

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::Leaf: return "leaf";
        case OpKind::Matmul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Mul: return "mul";
        case OpKind::Scale: return "scale";
        case OpKind::Concat: return "concat";
        case OpKind::Slice: return "slice";
        case OpKind::Transpose: return "transpose";
        case OpKind::SumAll: return "sum_all";
        case OpKind::MeanAll: return "mean_all";
        case OpKind::MeanRows: return "mean_rows";
        case OpKind::SoftmaxRows: return "softmax_rows";
        case OpKind::LayerNormRows: return "layer_norm_rows";
        case OpKind::Gelu: return "gelu";
        case OpKind::Relu: return "relu";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Tanh: return "tanh";
        case OpKind::MseLoss: return "mse_loss";
        case OpKind::Reshape: return "reshape";
        case OpKind::RepeatRows: return "repeat_rows";
        case OpKind::GatherCols: return "gather_cols";
        case OpKind::PadCols: return "pad_cols";
        case OpKind::PowerNorm: return "power_normalize";
    }
    return "?";
}

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::input(const Tensor& t) {
    Node n;
    n.op = OpKind::Leaf;
    n.value = t;
    n.requires_grad = t.requires_grad;
    return push(std::move(n));
}

NodeId Graph::constant(Tensor t) {
    t.requires_grad = false;
    return input(t);
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_rank2("matmul", ta);
    require_rank2("matmul", tb);
    if (ta.shape[1] != tb.shape[0]) shape_error("matmul", ta, tb);
    Node n;
    n.op = OpKind::Matmul;
    n.in = {a, b, -1};
    n.n_in = 2;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = Tensor({ta.shape[0], tb.shape[1]});
    matmul_acc(ta.data.data(), tb.data.data(), n.value.data.data(), ta.shape[0], ta.shape[1], tb.shape[1]);
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) shape_error("add", ta, tb);
    Node n;
    n.op = OpKind::Add;
    n.in = {a, b, -1};
    n.n_in = 2;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = ta;
    n.value.requires_grad = false;
    for (std::size_t i = 0; i < tb.data.size(); ++i) n.value.data[i] += tb.data[i];
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) shape_error("mul", ta, tb);
    Node n;
    n.op = OpKind::Mul;
    n.in = {a, b, -1};
    n.n_in = 2;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = ta;
    n.value.requires_grad = false;
    for (std::size_t i = 0; i < tb.data.size(); ++i) n.value.data[i] *= tb.data[i];
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double c) {
    Node n;
    n.op = OpKind::Scale;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.c = c;
    n.requires_grad = requires_grad(a);
    n.value = value(a);
    n.value.requires_grad = false;
    for (auto& v : n.value.data) v *= c;
    return push(std::move(n));
}

NodeId Graph::concat(NodeId a, NodeId b, int axis) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_rank2("concat", ta);
    require_rank2("concat", tb);
    if (axis != 0 && axis != 1) shape_error("concat", ta, "axis must be 0 or 1");
    if (ta.shape[1 - axis] != tb.shape[1 - axis]) shape_error("concat", ta, tb);
    Node n;
    n.op = OpKind::Concat;
    n.in = {a, b, -1};
    n.n_in = 2;
    n.axis = axis;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    if (axis == 0) {
        n.value = Tensor({ta.shape[0] + tb.shape[0], ta.shape[1]});
        std::copy(ta.data.begin(), ta.data.end(), n.value.data.begin());
        std::copy(tb.data.begin(), tb.data.end(), n.value.data.begin() + ta.size());
    } else {
        n.value = Tensor({ta.shape[0], ta.shape[1] + tb.shape[1]});
        for (int r = 0; r < ta.shape[0]; ++r) {
            std::copy(&ta.at(r, 0), &ta.at(r, 0) + ta.shape[1], &n.value.at(r, 0));
            std::copy(&tb.at(r, 0), &tb.at(r, 0) + tb.shape[1], &n.value.at(r, ta.shape[1]));
        }
    }
    return push(std::move(n));
}

NodeId Graph::slice(NodeId a, int axis, int begin, int end) {
    const Tensor& ta = value(a);
    require_rank2("slice", ta);
    if (axis != 0 && axis != 1) shape_error("slice", ta, "axis must be 0 or 1");
    if (begin < 0 || end <= begin || end > ta.shape[axis])
        shape_error("slice", ta, "range [" + std::to_string(begin) + "," + std::to_string(end) + ") out of bounds");
    Node n;
    n.op = OpKind::Slice;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.axis = axis;
    n.a0 = begin;
    n.a1 = end;
    n.requires_grad = requires_grad(a);
    if (axis == 0) {
        n.value = Tensor({end - begin, ta.shape[1]});
        std::copy(&ta.at(begin, 0), &ta.at(begin, 0) + n.value.size(), n.value.data.begin());
    } else {
        n.value = Tensor({ta.shape[0], end - begin});
        for (int r = 0; r < ta.shape[0]; ++r)
            std::copy(&ta.at(r, begin), &ta.at(r, end), &n.value.at(r, 0));
    }
    return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
    const Tensor& ta = value(a);
    require_rank2("transpose", ta);
    Node n;
    n.op = OpKind::Transpose;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.requires_grad = requires_grad(a);
    n.value = Tensor({ta.shape[1], ta.shape[0]});
    for (int r = 0; r < ta.shape[0]; ++r)
        for (int c = 0; c < ta.shape[1]; ++c) n.value.at(c, r) = ta.at(r, c);
    return push(std::move(n));
}

NodeId Graph::sum_all(NodeId a) {
    Node n;
    n.op = OpKind::SumAll;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.requires_grad = requires_grad(a);
    double s = 0.0;
    for (double v : value(a).data) s += v;
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

NodeId Graph::mean_all(NodeId a) {
    Node n;
    n.op = OpKind::MeanAll;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.requires_grad = requires_grad(a);
    double s = 0.0;
    for (double v : value(a).data) s += v;
    n.value = Tensor::scalar(s / static_cast<double>(value(a).size()));
    return push(std::move(n));
}

NodeId Graph::mean_rows(NodeId a) {
    const Tensor& ta = value(a);
    require_rank2("mean_rows", ta);
    Node n;
    n.op = OpKind::MeanRows;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.requires_grad = requires_grad(a);
    n.value = Tensor({1, ta.shape[1]});
    for (int r = 0; r < ta.shape[0]; ++r)
        for (int c = 0; c < ta.shape[1]; ++c) n.value.data[static_cast<std::size_t>(c)] += ta.at(r, c);
    for (auto& v : n.value.data) v /= ta.shape[0];
    return push(std::move(n));
}

NodeId Graph::softmax_rows(NodeId a) {
    const Tensor& ta = value(a);
    require_rank2("softmax_rows", ta);
    if (ta.shape[1] < 1) shape_error("softmax_rows", ta, "empty rows");
    Node n;
    n.op = OpKind::SoftmaxRows;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(ta.shape);
    for (int r = 0; r < ta.shape[0]; ++r) {
        double mx = ta.at(r, 0);
        for (int c = 1; c < ta.shape[1]; ++c) mx = std::max(mx, ta.at(r, c));
        double sum = 0.0;
        for (int c = 0; c < ta.shape[1]; ++c) {
            const double e = std::exp(ta.at(r, c) - mx);
            n.value.at(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < ta.shape[1]; ++c) n.value.at(r, c) /= sum;
    }
    return push(std::move(n));
}

NodeId Graph::layer_norm_rows(NodeId x, NodeId gain, NodeId bias) {
    const Tensor& tx = value(x);
    const Tensor& tg = value(gain);
    const Tensor& tb = value(bias);
    require_rank2("layer_norm_rows", tx);
    if (tx.shape[1] < 1) shape_error("layer_norm_rows", tx, "empty rows");
    if (tg.shape != Shape{1, tx.shape[1]}) shape_error("layer_norm_rows", tx, tg);
    if (tb.shape != Shape{1, tx.shape[1]}) shape_error("layer_norm_rows", tx, tb);
    Node n;
    n.op = OpKind::LayerNormRows;
    n.in = {x, gain, bias};
    n.n_in = 3;
    n.requires_grad = requires_grad(x) || requires_grad(gain) || requires_grad(bias);
    const int d = tx.shape[1];
    n.value = Tensor(tx.shape);
    n.mu.resize(static_cast<std::size_t>(tx.shape[0]));
    n.inv_sigma.resize(static_cast<std::size_t>(tx.shape[0]));
    for (int r = 0; r < tx.shape[0]; ++r) {
        double mu = 0.0;
        for (int c = 0; c < d; ++c) mu += tx.at(r, c);
        mu /= d;
        double var = 0.0;
        for (int c = 0; c < d; ++c) {
            const double dv = tx.at(r, c) - mu;
            var += dv * dv;
        }
        var /= d;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        n.mu[static_cast<std::size_t>(r)] = mu;
        n.inv_sigma[static_cast<std::size_t>(r)] = inv;
        for (int c = 0; c < d; ++c)
            n.value.at(r, c) = (tx.at(r, c) - mu) * inv * tg.data[static_cast<std::size_t>(c)] +
                               tb.data[static_cast<std::size_t>(c)];
    }
    return push(std::move(n));
}

NodeId Graph::gelu(NodeId a) {
    Node n;
    n.op = OpKind::Gelu;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.requires_grad = requires_grad(a);
    n.value = value(a);
    n.value.requires_grad = false;
    for (auto& v : n.value.data) v = 0.5 * v * (1.0 + std::erf(v / kSqrt2));
    return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
    Node n;
    n.op = OpKind::Relu;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.requires_grad = requires_grad(a);
    n.value = value(a);
    n.value.requires_grad = false;
    for (auto& v : n.value.data) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
    Node n;
    n.op = OpKind::Sigmoid;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.requires_grad = requires_grad(a);
    n.value = value(a);
    n.value.requires_grad = false;
    for (auto& v : n.value.data) v = 1.0 / (1.0 + std::exp(-v));
    return push(std::move(n));
}

NodeId Graph::tanh_(NodeId a) {
    Node n;
    n.op = OpKind::Tanh;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.requires_grad = requires_grad(a);
    n.value = value(a);
    n.value.requires_grad = false;
    for (auto& v : n.value.data) v = std::tanh(v);
    return push(std::move(n));
}

NodeId Graph::mse_loss(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) shape_error("mse_loss", ta, tb);
    Node n;
    n.op = OpKind::MseLoss;
    n.in = {a, b, -1};
    n.n_in = 2;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    double s = 0.0;
    for (std::size_t i = 0; i < ta.data.size(); ++i) {
        const double d = ta.data[i] - tb.data[i];
        s += d * d;
    }
    n.value = Tensor::scalar(s / static_cast<double>(ta.size()));
    return push(std::move(n));
}

NodeId Graph::reshape(NodeId a, Shape target) {
    const Tensor& ta = value(a);
    if (numel(target) != ta.size()) shape_error("reshape", ta, "target " + shape_str(target) + " has different size");
    Node n;
    n.op = OpKind::Reshape;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.requires_grad = requires_grad(a);
    n.value = ta;
    n.value.requires_grad = false;
    n.value.shape = std::move(target);
    return push(std::move(n));
}

NodeId Graph::repeat_rows(NodeId a, int nrep) {
    const Tensor& ta = value(a);
    require_rank2("repeat_rows", ta);
    if (ta.shape[0] != 1) shape_error("repeat_rows", ta, "single-row tensor required");
    if (nrep < 1) shape_error("repeat_rows", ta, "repeat count must be positive");
    Node n;
    n.op = OpKind::RepeatRows;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.a0 = nrep;
    n.requires_grad = requires_grad(a);
    n.value = Tensor({nrep, ta.shape[1]});
    for (int r = 0; r < nrep; ++r)
        std::copy(ta.data.begin(), ta.data.end(), n.value.data.begin() + static_cast<std::size_t>(r) * ta.shape[1]);
    return push(std::move(n));
}

NodeId Graph::gather_cols(NodeId a, std::vector<int> indices) {
    const Tensor& ta = value(a);
    require_rank2("gather_cols", ta);
    if (indices.empty()) shape_error("gather_cols", ta, "empty index list");
    for (int i : indices)
        if (i < 0 || i >= ta.shape[1]) shape_error("gather_cols", ta, "index " + std::to_string(i) + " out of range");
    Node n;
    n.op = OpKind::GatherCols;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.requires_grad = requires_grad(a);
    n.value = Tensor({ta.shape[0], static_cast<int>(indices.size())});
    for (int r = 0; r < ta.shape[0]; ++r)
        for (std::size_t j = 0; j < indices.size(); ++j)
            n.value.at(r, static_cast<int>(j)) = ta.at(r, indices[j]);
    n.idx = std::move(indices);
    return push(std::move(n));
}

NodeId Graph::pad_cols(NodeId a, int len) {
    const Tensor& ta = value(a);
    require_rank2("pad_cols", ta);
    if (len < ta.shape[1]) shape_error("pad_cols", ta, "target length " + std::to_string(len) + " shorter than input");
    Node n;
    n.op = OpKind::PadCols;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.a0 = len;
    n.requires_grad = requires_grad(a);
    n.value = Tensor({ta.shape[0], len});
    for (int r = 0; r < ta.shape[0]; ++r)
        std::copy(&ta.at(r, 0), &ta.at(r, 0) + ta.shape[1], &n.value.at(r, 0));
    return push(std::move(n));
}

NodeId Graph::power_normalize(NodeId a) {
    const Tensor& ta = value(a);
    require_rank2("power_normalize", ta);
    Node n;
    n.op = OpKind::PowerNorm;
    n.in = {a, -1, -1};
    n.n_in = 1;
    n.requires_grad = requires_grad(a);
    n.value = Tensor(ta.shape);
    const double s = std::sqrt(static_cast<double>(ta.shape[1]));
    for (int r = 0; r < ta.shape[0]; ++r) {
        double sq = 0.0;
        for (int c = 0; c < ta.shape[1]; ++c) sq += ta.at(r, c) * ta.at(r, c);
        if (sq <= 0.0) shape_error("power_normalize", ta, "zero-power row " + std::to_string(r));
        const double k = s / std::sqrt(sq);
        for (int c = 0; c < ta.shape[1]; ++c) n.value.at(r, c) = ta.at(r, c) * k;
    }
    return push(std::move(n));
}

std::vector<Tensor> Graph::backward(NodeId loss) const {
    const Tensor& lv = value(loss);
    if (lv.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(lv.shape));
    std::vector<Tensor> grads(nodes_.size());
    // Non-participating requires_grad leaves report exact zeros.
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].op == OpKind::Leaf && nodes_[i].requires_grad) grads[i] = Tensor(nodes_[i].value.shape);
    if (!node(loss).requires_grad) return grads;

    if (grads[static_cast<std::size_t>(loss)].size() == 0)
        grads[static_cast<std::size_t>(loss)] = Tensor(lv.shape);
    grads[static_cast<std::size_t>(loss)].data[0] = 1.0;

    auto ensure = [&](NodeId id) -> Tensor& {
        Tensor& g = grads[static_cast<std::size_t>(id)];
        if (g.size() == 0) g = Tensor(value(id).shape);
        return g;
    };
    auto wants = [&](NodeId id) { return id >= 0 && node(id).requires_grad; };

    for (NodeId i = loss; i >= 0; --i) {
        const Node& n = node(i);
        if (!n.requires_grad || n.op == OpKind::Leaf) continue;
        const Tensor& g = grads[static_cast<std::size_t>(i)];
        if (g.size() == 0) continue;  // node not on any path to the loss
        const NodeId a = n.in[0];
        const NodeId b = n.in[1];
        switch (n.op) {
            case OpKind::Matmul: {
                const Tensor& ta = value(a);
                const Tensor& tb = value(b);
                if (wants(a))
                    matmul_a_bt_acc(g.data.data(), tb.data.data(), ensure(a).data.data(), tb.shape[1], ta.shape[0],
                                    tb.shape[0]);
                if (wants(b))
                    matmul_at_b_acc(ta.data.data(), g.data.data(), ensure(b).data.data(), ta.shape[0], ta.shape[1],
                                    g.shape[1]);
                break;
            }
            case OpKind::Add: {
                for (NodeId t : {a, b}) {
                    if (!wants(t)) continue;
                    Tensor& gt = ensure(t);
                    for (std::size_t j = 0; j < g.data.size(); ++j) gt.data[j] += g.data[j];
                }
                break;
            }
            case OpKind::Mul: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    const Tensor& tb = value(b);
                    for (std::size_t j = 0; j < g.data.size(); ++j) ga.data[j] += g.data[j] * tb.data[j];
                }
                if (wants(b)) {
                    Tensor& gb = ensure(b);
                    const Tensor& ta = value(a);
                    for (std::size_t j = 0; j < g.data.size(); ++j) gb.data[j] += g.data[j] * ta.data[j];
                }
                break;
            }
            case OpKind::Scale: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    for (std::size_t j = 0; j < g.data.size(); ++j) ga.data[j] += g.data[j] * n.c;
                }
                break;
            }
            case OpKind::Concat: {
                const Tensor& ta = value(a);
                if (n.axis == 0) {
                    if (wants(a)) {
                        Tensor& ga = ensure(a);
                        for (std::size_t j = 0; j < ta.data.size(); ++j) ga.data[j] += g.data[j];
                    }
                    if (wants(b)) {
                        Tensor& gb = ensure(b);
                        for (std::size_t j = 0; j < gb.data.size(); ++j)
                            gb.data[j] += g.data[j + ta.data.size()];
                    }
                } else {
                    const int ac = ta.shape[1];
                    if (wants(a)) {
                        Tensor& ga = ensure(a);
                        for (int r = 0; r < ta.shape[0]; ++r)
                            for (int c = 0; c < ac; ++c) ga.at(r, c) += g.at(r, c);
                    }
                    if (wants(b)) {
                        Tensor& gb = ensure(b);
                        for (int r = 0; r < gb.shape[0]; ++r)
                            for (int c = 0; c < gb.shape[1]; ++c) gb.at(r, c) += g.at(r, ac + c);
                    }
                }
                break;
            }
            case OpKind::Slice: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    if (n.axis == 0) {
                        for (int r = 0; r < g.shape[0]; ++r)
                            for (int c = 0; c < g.shape[1]; ++c) ga.at(n.a0 + r, c) += g.at(r, c);
                    } else {
                        for (int r = 0; r < g.shape[0]; ++r)
                            for (int c = 0; c < g.shape[1]; ++c) ga.at(r, n.a0 + c) += g.at(r, c);
                    }
                }
                break;
            }
            case OpKind::Transpose: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    for (int r = 0; r < g.shape[0]; ++r)
                        for (int c = 0; c < g.shape[1]; ++c) ga.at(c, r) += g.at(r, c);
                }
                break;
            }
            case OpKind::SumAll: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    for (auto& v : ga.data) v += g.data[0];
                }
                break;
            }
            case OpKind::MeanAll: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    const double k = g.data[0] / static_cast<double>(ga.size());
                    for (auto& v : ga.data) v += k;
                }
                break;
            }
            case OpKind::MeanRows: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    const double inv = 1.0 / ga.shape[0];
                    for (int r = 0; r < ga.shape[0]; ++r)
                        for (int c = 0; c < ga.shape[1]; ++c)
                            ga.at(r, c) += g.data[static_cast<std::size_t>(c)] * inv;
                }
                break;
            }
            case OpKind::SoftmaxRows: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    const Tensor& y = n.value;
                    for (int r = 0; r < y.shape[0]; ++r) {
                        double dot = 0.0;
                        for (int c = 0; c < y.shape[1]; ++c) dot += g.at(r, c) * y.at(r, c);
                        for (int c = 0; c < y.shape[1]; ++c)
                            ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
                    }
                }
                break;
            }
            case OpKind::LayerNormRows: {
                const Tensor& tx = value(a);
                const Tensor& tg = value(b);
                const int d = tx.shape[1];
                const NodeId bias = n.in[2];
                for (int r = 0; r < tx.shape[0]; ++r) {
                    const double mu = n.mu[static_cast<std::size_t>(r)];
                    const double inv = n.inv_sigma[static_cast<std::size_t>(r)];
                    // dy_hat = g * gain; dx = inv*(dy_hat - mean(dy_hat) - y_hat*mean(dy_hat*y_hat))
                    double m1 = 0.0, m2 = 0.0;
                    for (int c = 0; c < d; ++c) {
                        const double yh = (tx.at(r, c) - mu) * inv;
                        const double dyh = g.at(r, c) * tg.data[static_cast<std::size_t>(c)];
                        m1 += dyh;
                        m2 += dyh * yh;
                    }
                    m1 /= d;
                    m2 /= d;
                    if (wants(a)) {
                        Tensor& ga = ensure(a);
                        for (int c = 0; c < d; ++c) {
                            const double yh = (tx.at(r, c) - mu) * inv;
                            const double dyh = g.at(r, c) * tg.data[static_cast<std::size_t>(c)];
                            ga.at(r, c) += inv * (dyh - m1 - yh * m2);
                        }
                    }
                    if (wants(b)) {
                        Tensor& gg = ensure(b);
                        for (int c = 0; c < d; ++c) {
                            const double yh = (tx.at(r, c) - mu) * inv;
                            gg.data[static_cast<std::size_t>(c)] += g.at(r, c) * yh;
                        }
                    }
                    if (wants(bias)) {
                        Tensor& gb = ensure(bias);
                        for (int c = 0; c < d; ++c) gb.data[static_cast<std::size_t>(c)] += g.at(r, c);
                    }
                }
                break;
            }
            case OpKind::Gelu: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    const Tensor& tx = value(a);
                    for (std::size_t j = 0; j < g.data.size(); ++j) {
                        const double x = tx.data[j];
                        const double phi = 0.5 * (1.0 + std::erf(x / kSqrt2));
                        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                        ga.data[j] += g.data[j] * (phi + x * pdf);
                    }
                }
                break;
            }
            case OpKind::Relu: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    const Tensor& tx = value(a);
                    for (std::size_t j = 0; j < g.data.size(); ++j)
                        if (tx.data[j] > 0.0) ga.data[j] += g.data[j];
                }
                break;
            }
            case OpKind::Sigmoid: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    const Tensor& y = n.value;
                    for (std::size_t j = 0; j < g.data.size(); ++j)
                        ga.data[j] += g.data[j] * y.data[j] * (1.0 - y.data[j]);
                }
                break;
            }
            case OpKind::Tanh: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    const Tensor& y = n.value;
                    for (std::size_t j = 0; j < g.data.size(); ++j)
                        ga.data[j] += g.data[j] * (1.0 - y.data[j] * y.data[j]);
                }
                break;
            }
            case OpKind::MseLoss: {
                const Tensor& ta = value(a);
                const Tensor& tb = value(b);
                const double k = 2.0 * g.data[0] / static_cast<double>(ta.size());
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    for (std::size_t j = 0; j < ta.data.size(); ++j)
                        ga.data[j] += k * (ta.data[j] - tb.data[j]);
                }
                if (wants(b)) {
                    Tensor& gb = ensure(b);
                    for (std::size_t j = 0; j < ta.data.size(); ++j)
                        gb.data[j] -= k * (ta.data[j] - tb.data[j]);
                }
                break;
            }
            case OpKind::Reshape: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    for (std::size_t j = 0; j < g.data.size(); ++j) ga.data[j] += g.data[j];
                }
                break;
            }
            case OpKind::RepeatRows: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    for (int r = 0; r < g.shape[0]; ++r)
                        for (int c = 0; c < g.shape[1]; ++c) ga.data[static_cast<std::size_t>(c)] += g.at(r, c);
                }
                break;
            }
            case OpKind::GatherCols: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    for (int r = 0; r < g.shape[0]; ++r)
                        for (std::size_t j = 0; j < n.idx.size(); ++j)
                            ga.at(r, n.idx[j]) += g.at(r, static_cast<int>(j));
                }
                break;
            }
            case OpKind::PadCols: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    for (int r = 0; r < ga.shape[0]; ++r)
                        for (int c = 0; c < ga.shape[1]; ++c) ga.at(r, c) += g.at(r, c);
                }
                break;
            }
            case OpKind::PowerNorm: {
                if (wants(a)) {
                    Tensor& ga = ensure(a);
                    const Tensor& tx = value(a);
                    const double s = std::sqrt(static_cast<double>(tx.shape[1]));
                    for (int r = 0; r < tx.shape[0]; ++r) {
                        double sq = 0.0, dot = 0.0;
                        for (int c = 0; c < tx.shape[1]; ++c) {
                            sq += tx.at(r, c) * tx.at(r, c);
                            dot += g.at(r, c) * tx.at(r, c);
                        }
                        const double rlen = std::sqrt(sq);
                        for (int c = 0; c < tx.shape[1]; ++c)
                            ga.at(r, c) += s / rlen * (g.at(r, c) - tx.at(r, c) * dot / sq);
                    }
                }
                break;
            }
            case OpKind::Leaf:
                break;
        }
    }
    return grads;
}

double grad_check(const std::function<NodeId(Graph&, const std::vector<NodeId>&)>& build,
                  const std::vector<Tensor>& leaves, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");

    auto eval = [&](const std::vector<Tensor>& vals) {
        Graph g;
        std::vector<NodeId> ids;
        ids.reserve(vals.size());
        for (const auto& t : vals) {
            Tensor leaf = t;
            leaf.requires_grad = true;
            ids.push_back(g.input(leaf));
        }
        const NodeId loss = build(g, ids);
        return std::pair<double, std::pair<Graph, std::vector<NodeId>>>{g.value(loss).item(), {std::move(g), ids}};
    };

    // Analytic pass.
    Graph g;
    std::vector<NodeId> ids;
    for (const auto& t : leaves) {
        Tensor leaf = t;
        leaf.requires_grad = true;
        ids.push_back(g.input(leaf));
    }
    const NodeId loss = build(g, ids);
    const auto grads = g.backward(loss);

    double max_err = 0.0;
    std::vector<Tensor> vals = leaves;
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        for (std::size_t i = 0; i < leaves[l].data.size(); ++i) {
            const double keep = vals[l].data[i];
            vals[l].data[i] = keep + eps;
            const double fp = eval(vals).first;
            vals[l].data[i] = keep - eps;
            const double fm = eval(vals).first;
            vals[l].data[i] = keep;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double analytic = grads[static_cast<std::size_t>(ids[l])].data[i];
            const double err =
                std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace psic::ad
