#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wam/core/param_store.hpp"
#include "wam/core/tensor.hpp"

namespace wam::core {

using GradMap = std::map<std::string, Tensor>;

/// Recorded forward computation over a small fixed op zoo (linear, relu, tanh,
/// sigmoid, concat, mean-pool, loss heads). Values are computed eagerly as
/// nodes are added; backward() replays the tape in reverse with explicit
/// per-op rules. Parameters are referenced by name and validated against the
/// store's mutation version, so a graph recorded before an optimizer step
/// cannot silently be differentiated after it.
class Graph {
public:
    using NodeId = std::int32_t;

    NodeId param(const ParamStore& store, const std::string& name);
    NodeId input(Tensor value);

    /// y = W x + b with W:[out,in], b:[out], x:[in]. `where` names the layer
    /// in dimension errors.
    NodeId linear(NodeId x, NodeId w, NodeId b, const std::string& where);

    NodeId relu(NodeId x);
    NodeId tanh_act(NodeId x);
    NodeId sigmoid(NodeId x);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId scale(NodeId x, double c);

    /// Concatenation of 1-D values in order.
    NodeId concat(const std::vector<NodeId>& xs);
    /// Elementwise mean of equally shaped values (token mean-pool).
    NodeId mean_tokens(const std::vector<NodeId>& xs);

    /// sum_i x_i^2  -> scalar
    NodeId squared_norm(NodeId x);
    /// mean_i (x_i - t_i)^2 -> scalar
    NodeId mse_mean(NodeId pred, NodeId target);
    /// sum_i w_i (x_i - t_i)^2 / sum_i w_i -> scalar (weights are constants)
    NodeId weighted_mse_mean(NodeId pred, NodeId target, Tensor weights);
    /// mean_i d(pred_i, t_i) with the beta-parameterized smooth L1 distance.
    NodeId smooth_l1_mean(NodeId pred, NodeId target, double beta);
    /// mean_i -[y ln s + (1-y) ln(1-s)], scores clamped to [eps, 1-eps].
    NodeId bce_mean(NodeId scores, NodeId labels, double eps = 1e-7);
    NodeId mean_scalars(const std::vector<NodeId>& xs);

    const Tensor& value(NodeId id) const;
    std::size_t node_count() const { return nodes_.size(); }

    /// d loss / d p for every parameter in `params`; parameters the loss does
    /// not touch map to zero tensors. Loss must be scalar. A non-empty
    /// `prefix` restricts the returned map to matching names (training-loop
    /// fast path; the contract above is the empty-prefix behavior).
    GradMap backward(NodeId loss, const ParamStore& params,
                     const std::string& prefix = "") const;

private:
    enum class Op {
        Param, Input, Linear, Relu, Tanh, Sigmoid, Add, Sub, Scale,
        Concat, MeanTokens, SquaredNorm, MseMean, WeightedMseMean, SmoothL1Mean, BceMean, MeanScalars
    };

    struct Node {
        Op op;
        std::vector<NodeId> in;
        Tensor value;               // owned value (non-param nodes)
        const Tensor* ref = nullptr; // param nodes alias the store's tensor
        std::string name;           // param name / layer label
        double c0 = 0.0;            // scale factor, beta, eps
        Tensor aux;                 // op constants (per-element weights)
    };

    NodeId push(Node n);
    void bind_store(const ParamStore& store);
    const Tensor& val(NodeId id) const;

    std::vector<Node> nodes_;
    std::map<std::string, NodeId> param_nodes_;
    const ParamStore* store_ = nullptr;
    std::uint64_t store_version_ = 0;
};

} // namespace wam::core
