#include "wam/core/mlp.hpp"

#include <cmath>

#include "wam/core/errors.hpp"

namespace wam::core {

std::string act_name(Act a) {
    switch (a) {
    case Act::Linear: return "linear";
    case Act::Relu: return "relu";
    case Act::Tanh: return "tanh";
    case Act::Sigmoid: return "sigmoid";
    }
    return "?";
}

std::string MlpSpec::weight_name(std::size_t layer) const {
    return prefix + ".w" + std::to_string(layer);
}

std::string MlpSpec::bias_name(std::size_t layer) const {
    return prefix + ".b" + std::to_string(layer);
}

void MlpSpec::validate() const {
    if (widths.size() < 2) throw ContractError(prefix + ": spec needs at least one layer");
    if (acts.size() != widths.size() - 1) {
        throw ContractError(prefix + ": acts/widths length mismatch");
    }
    for (std::size_t w : widths) {
        if (w == 0) throw DimensionError(prefix + ": zero layer width");
    }
}

void init_mlp(ParamStore& store, const MlpSpec& spec, RngStream& rng) {
    spec.validate();
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        std::size_t in = spec.widths[l], out = spec.widths[l + 1];
        double bound = std::sqrt(3.0 / static_cast<double>(in));
        Tensor w({out, in});
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
        store.create(spec.weight_name(l), std::move(w));
        store.create(spec.bias_name(l), Tensor({out}));
    }
}

Tensor mlp_apply(const ParamStore& store, const MlpSpec& spec, const Tensor& input) {
    spec.validate();
    input.ensure_finite("mlp_apply input (" + spec.prefix + ")");
    if (input.size() != spec.in_width()) {
        throw DimensionError(spec.prefix + ".w0: input width " + std::to_string(input.size()) +
                             " does not match layer width " + std::to_string(spec.in_width()));
    }
    std::vector<double> x = input.vec_data();
    std::vector<double> y;
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        const Tensor& w = store.get(spec.weight_name(l));
        const Tensor& b = store.get(spec.bias_name(l));
        std::size_t out = w.shape()[0], in = w.shape()[1];
        if (x.size() != in) {
            throw DimensionError(spec.prefix + ".w" + std::to_string(l) + ": width mismatch");
        }
        y.assign(out, 0.0);
        const double* wd = w.data();
        for (std::size_t o = 0; o < out; ++o) {
            double acc = b[o];
            const double* row = wd + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
            y[o] = acc;
        }
        switch (spec.acts[l]) {
        case Act::Linear: break;
        case Act::Relu:
            for (double& v : y) v = v > 0.0 ? v : 0.0;
            break;
        case Act::Tanh:
            for (double& v : y) v = std::tanh(v);
            break;
        case Act::Sigmoid:
            for (double& v : y) v = 1.0 / (1.0 + std::exp(-v));
            break;
        }
        x.swap(y);
    }
    Tensor out_t = Tensor::vec(std::move(x));
    out_t.ensure_finite("mlp_apply output (" + spec.prefix + ")");
    return out_t;
}

Graph::NodeId Graph_apply_layer(Graph& g, Graph::NodeId x, Act act) {
    switch (act) {
    case Act::Linear: return x;
    case Act::Relu: return g.relu(x);
    case Act::Tanh: return g.tanh_act(x);
    case Act::Sigmoid: return g.sigmoid(x);
    }
    return x;
}

Graph::NodeId mlp_node(Graph& g, const ParamStore& store, const MlpSpec& spec,
                       Graph::NodeId input) {
    spec.validate();
    Graph::NodeId x = input;
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        Graph::NodeId w = g.param(store, spec.weight_name(l));
        Graph::NodeId b = g.param(store, spec.bias_name(l));
        x = g.linear(x, w, b, spec.prefix + ".w" + std::to_string(l));
        x = Graph_apply_layer(g, x, spec.acts[l]);
    }
    return x;
}

} // namespace wam::core
