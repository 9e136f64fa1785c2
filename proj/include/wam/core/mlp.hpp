#pragma once

#include <string>
#include <vector>

#include "wam/core/graph.hpp"
#include "wam/core/param_store.hpp"
#include "wam/core/rng.hpp"
#include "wam/core/tensor.hpp"

namespace wam::core {

enum class Act { Linear, Relu, Tanh, Sigmoid };

std::string act_name(Act a);

/// Architecture descriptor for a plain feed-forward stack. widths lists the
/// input width followed by each layer's output width; acts holds one entry
/// per layer. Parameter names are "<prefix>.w<i>" / "<prefix>.b<i>".
struct MlpSpec {
    std::string prefix;
    std::vector<std::size_t> widths;
    std::vector<Act> acts;

    std::size_t layers() const { return acts.size(); }
    std::size_t in_width() const { return widths.front(); }
    std::size_t out_width() const { return widths.back(); }
    std::string weight_name(std::size_t layer) const;
    std::string bias_name(std::size_t layer) const;
    void validate() const;
};

/// Creates the spec's parameters with scaled uniform init (weights) and zero
/// biases. Draws come only from `rng`, so init is reproducible.
void init_mlp(ParamStore& store, const MlpSpec& spec, RngStream& rng);

/// Pure forward pass. Same arithmetic and op order as the recorded version.
Tensor mlp_apply(const ParamStore& store, const MlpSpec& spec, const Tensor& input);

/// Recorded forward pass for training.
Graph::NodeId mlp_node(Graph& g, const ParamStore& store, const MlpSpec& spec,
                       Graph::NodeId input);

} // namespace wam::core
