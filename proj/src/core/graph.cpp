#include "wam/core/graph.hpp"

#include <algorithm>
#include <cmath>

#include "wam/core/errors.hpp"

namespace wam::core {

Graph::NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Graph::bind_store(const ParamStore& store) {
    if (store_ == nullptr) {
        store_ = &store;
        store_version_ = store.version();
    } else if (store_ != &store) {
        throw ContractError("graph already bound to a different ParamStore");
    }
}

const Tensor& Graph::val(NodeId id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.value;
}

Graph::NodeId Graph::param(const ParamStore& store, const std::string& name) {
    bind_store(store);
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) return it->second;
    Node n;
    n.op = Op::Param;
    n.ref = &store.get(name); // map nodes are address-stable; staleness guarded by version
    n.name = name;
    NodeId id = push(std::move(n));
    param_nodes_.emplace(name, id);
    return id;
}

Graph::NodeId Graph::input(Tensor value) {
    value.ensure_finite("graph input");
    Node n;
    n.op = Op::Input;
    n.value = std::move(value);
    return push(std::move(n));
}

Graph::NodeId Graph::linear(NodeId x, NodeId w, NodeId b, const std::string& where) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    const Tensor& bv = val(b);
    if (wv.shape().size() != 2) throw DimensionError(where + ": weight is not a matrix");
    std::size_t out = wv.shape()[0], in = wv.shape()[1];
    if (xv.size() != in) {
        throw DimensionError(where + ": input width " + std::to_string(xv.size()) +
                             " does not match layer width " + std::to_string(in));
    }
    if (bv.size() != out) throw DimensionError(where + ": bias width mismatch");
    Tensor y({out});
    const double* xd = xv.data();
    const double* wd = wv.data();
    for (std::size_t o = 0; o < out; ++o) {
        double acc = bv[o];
        const double* row = wd + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += row[i] * xd[i];
        y[o] = acc;
    }
    Node n;
    n.op = Op::Linear;
    n.in = {x, w, b};
    n.value = std::move(y);
    n.name = where;
    return push(std::move(n));
}

Graph::NodeId Graph::relu(NodeId x) {
    Tensor y = val(x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
    Node n{Op::Relu, {x}, std::move(y), nullptr, "", 0.0, {}};
    return push(std::move(n));
}

Graph::NodeId Graph::tanh_act(NodeId x) {
    Tensor y = val(x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
    Node n{Op::Tanh, {x}, std::move(y), nullptr, "", 0.0, {}};
    return push(std::move(n));
}

Graph::NodeId Graph::sigmoid(NodeId x) {
    Tensor y = val(x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-y[i]));
    Node n{Op::Sigmoid, {x}, std::move(y), nullptr, "", 0.0, {}};
    return push(std::move(n));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) throw DimensionError("add: shape mismatch");
    Tensor y = av;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
    Node n{Op::Add, {a, b}, std::move(y), nullptr, "", 0.0, {}};
    return push(std::move(n));
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) throw DimensionError("sub: shape mismatch");
    Tensor y = av;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
    Node n{Op::Sub, {a, b}, std::move(y), nullptr, "", 0.0, {}};
    return push(std::move(n));
}

Graph::NodeId Graph::scale(NodeId x, double c) {
    Tensor y = val(x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= c;
    Node n{Op::Scale, {x}, std::move(y), nullptr, "", c, {}};
    return push(std::move(n));
}

Graph::NodeId Graph::concat(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw ContractError("concat: empty input list");
    std::vector<double> data;
    for (NodeId id : xs) {
        const auto& v = val(id).vec_data();
        data.insert(data.end(), v.begin(), v.end());
    }
    Node n{Op::Concat, xs, Tensor::vec(std::move(data)), nullptr, "", 0.0, {}};
    return push(std::move(n));
}

Graph::NodeId Graph::mean_tokens(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw ContractError("mean_tokens: empty token list");
    const Tensor& first = val(xs[0]);
    Tensor y(first.shape());
    for (NodeId id : xs) {
        const Tensor& v = val(id);
        if (!v.same_shape(first)) throw DimensionError("mean_tokens: token shape mismatch");
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += v[i];
    }
    double inv = 1.0 / static_cast<double>(xs.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= inv;
    Node n{Op::MeanTokens, xs, std::move(y), nullptr, "", 0.0, {}};
    return push(std::move(n));
}

Graph::NodeId Graph::squared_norm(NodeId x) {
    const Tensor& xv = val(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * xv[i];
    Node n{Op::SquaredNorm, {x}, Tensor::scalar(acc), nullptr, "", 0.0, {}};
    return push(std::move(n));
}

Graph::NodeId Graph::mse_mean(NodeId pred, NodeId target) {
    const Tensor& p = val(pred);
    const Tensor& t = val(target);
    if (!p.same_shape(t)) throw DimensionError("mse: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double d = p[i] - t[i];
        acc += d * d;
    }
    acc /= static_cast<double>(p.size());
    Node n{Op::MseMean, {pred, target}, Tensor::scalar(acc), nullptr, "", 0.0, {}};
    return push(std::move(n));
}

Graph::NodeId Graph::weighted_mse_mean(NodeId pred, NodeId target, Tensor weights) {
    const Tensor& p = val(pred);
    const Tensor& t = val(target);
    if (!p.same_shape(t) || !p.same_shape(weights)) {
        throw DimensionError("weighted_mse: shape mismatch");
    }
    double acc = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double d = p[i] - t[i];
        acc += weights[i] * d * d;
        wsum += weights[i];
    }
    if (wsum <= 0.0) throw ContractError("weighted_mse: weights sum to zero");
    Node n;
    n.op = Op::WeightedMseMean;
    n.in = {pred, target};
    n.value = Tensor::scalar(acc / wsum);
    n.c0 = wsum;
    n.aux = std::move(weights);
    return push(std::move(n));
}

Graph::NodeId Graph::smooth_l1_mean(NodeId pred, NodeId target, double beta) {
    const Tensor& p = val(pred);
    const Tensor& t = val(target);
    if (!p.same_shape(t)) throw ContractError("smooth_l1: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double d = std::abs(p[i] - t[i]);
        acc += d < beta ? 0.5 * d * d / beta : d - 0.5 * beta;
    }
    acc /= static_cast<double>(p.size());
    Node n{Op::SmoothL1Mean, {pred, target}, Tensor::scalar(acc), nullptr, "", beta, {}};
    return push(std::move(n));
}

Graph::NodeId Graph::bce_mean(NodeId scores, NodeId labels, double eps) {
    const Tensor& s = val(scores);
    const Tensor& y = val(labels);
    if (!s.same_shape(y)) throw ContractError("bce: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double si = std::clamp(s[i], eps, 1.0 - eps);
        acc += -(y[i] * std::log(si) + (1.0 - y[i]) * std::log(1.0 - si));
    }
    acc /= static_cast<double>(s.size());
    Node n{Op::BceMean, {scores, labels}, Tensor::scalar(acc), nullptr, "", eps, {}};
    return push(std::move(n));
}

Graph::NodeId Graph::mean_scalars(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw ContractError("mean_scalars: empty list");
    double acc = 0.0;
    for (NodeId id : xs) {
        const Tensor& v = val(id);
        if (!v.is_scalar()) throw ContractError("mean_scalars: non-scalar term");
        acc += v[0];
    }
    acc /= static_cast<double>(xs.size());
    Node n{Op::MeanScalars, xs, Tensor::scalar(acc), nullptr, "", 0.0, {}};
    return push(std::move(n));
}

const Tensor& Graph::value(NodeId id) const { return val(id); }

GradMap Graph::backward(NodeId loss, const ParamStore& params,
                        const std::string& prefix) const {
    const Tensor& lv = val(loss);
    if (!lv.is_scalar()) throw ContractError("backward: loss is not a scalar");
    if (store_ != nullptr && store_ == &params && store_version_ != params.version()) {
        throw StalenessError("recorded graph is stale: parameters changed since the forward pass");
    }

    std::vector<Tensor> grads(nodes_.size());
    std::vector<char> live(nodes_.size(), 0);
    grads[loss] = Tensor::scalar(1.0);
    live[loss] = 1;

    auto grad_of = [&](NodeId id) -> Tensor& {
        if (!live[id]) {
            grads[id] = Tensor(val(id).shape());
            live[id] = 1;
        }
        return grads[id];
    };

    for (NodeId id = loss; id >= 0; --id) {
        if (!live[id]) continue;
        const Node& n = nodes_[id];
        const Tensor& g = grads[id];
        switch (n.op) {
        case Op::Param:
        case Op::Input:
            break;
        case Op::Linear: {
            NodeId x = n.in[0], w = n.in[1], b = n.in[2];
            const Tensor& xv = val(x);
            const Tensor& wv = val(w);
            std::size_t out = wv.shape()[0], in = wv.shape()[1];
            double* gx = grad_of(x).data();
            double* gw = grad_of(w).data();
            double* gb = grad_of(b).data();
            const double* xd = xv.data();
            const double* wd = wv.data();
            for (std::size_t o = 0; o < out; ++o) {
                double go = g[o];
                if (go == 0.0) continue;
                gb[o] += go;
                double* gwrow = gw + o * in;
                const double* wrow = wd + o * in;
                for (std::size_t i = 0; i < in; ++i) {
                    gwrow[i] += go * xd[i];
                    gx[i] += go * wrow[i];
                }
            }
            break;
        }
        case Op::Relu: {
            const Tensor& xv = val(n.in[0]);
            double* gx = grad_of(n.in[0]).data();
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (xv[i] > 0.0) gx[i] += g[i];
            }
            break;
        }
        case Op::Tanh: {
            double* gx = grad_of(n.in[0]).data();
            for (std::size_t i = 0; i < g.size(); ++i) {
                double t = n.value[i];
                gx[i] += g[i] * (1.0 - t * t);
            }
            break;
        }
        case Op::Sigmoid: {
            double* gx = grad_of(n.in[0]).data();
            for (std::size_t i = 0; i < g.size(); ++i) {
                double s = n.value[i];
                gx[i] += g[i] * s * (1.0 - s);
            }
            break;
        }
        case Op::Add: {
            double* ga = grad_of(n.in[0]).data();
            double* gb2 = grad_of(n.in[1]).data();
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb2[i] += g[i];
            }
            break;
        }
        case Op::Sub: {
            double* ga = grad_of(n.in[0]).data();
            double* gb2 = grad_of(n.in[1]).data();
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
                gb2[i] -= g[i];
            }
            break;
        }
        case Op::Scale: {
            double* gx = grad_of(n.in[0]).data();
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.c0;
            break;
        }
        case Op::Concat: {
            std::size_t off = 0;
            for (NodeId src : n.in) {
                std::size_t m = val(src).size();
                double* gs = grad_of(src).data();
                for (std::size_t i = 0; i < m; ++i) gs[i] += g[off + i];
                off += m;
            }
            break;
        }
        case Op::MeanTokens: {
            double inv = 1.0 / static_cast<double>(n.in.size());
            for (NodeId src : n.in) {
                double* gs = grad_of(src).data();
                for (std::size_t i = 0; i < g.size(); ++i) gs[i] += g[i] * inv;
            }
            break;
        }
        case Op::SquaredNorm: {
            const Tensor& xv = val(n.in[0]);
            double* gx = grad_of(n.in[0]).data();
            double go = g[0];
            for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += go * 2.0 * xv[i];
            break;
        }
        case Op::MseMean: {
            const Tensor& p = val(n.in[0]);
            const Tensor& t = val(n.in[1]);
            double* gp = grad_of(n.in[0]).data();
            double* gt = grad_of(n.in[1]).data();
            double go = g[0] * 2.0 / static_cast<double>(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) {
                double d = p[i] - t[i];
                gp[i] += go * d;
                gt[i] -= go * d;
            }
            break;
        }
        case Op::WeightedMseMean: {
            const Tensor& p = val(n.in[0]);
            const Tensor& t = val(n.in[1]);
            double* gp = grad_of(n.in[0]).data();
            double* gt = grad_of(n.in[1]).data();
            double go = g[0] * 2.0 / n.c0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                double d = go * n.aux[i] * (p[i] - t[i]);
                gp[i] += d;
                gt[i] -= d;
            }
            break;
        }
        case Op::SmoothL1Mean: {
            const Tensor& p = val(n.in[0]);
            const Tensor& t = val(n.in[1]);
            double* gp = grad_of(n.in[0]).data();
            double* gt = grad_of(n.in[1]).data();
            double beta = n.c0;
            double go = g[0] / static_cast<double>(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) {
                double d = p[i] - t[i];
                double dd = std::abs(d) < beta ? d / beta : (d > 0.0 ? 1.0 : -1.0);
                gp[i] += go * dd;
                gt[i] -= go * dd;
            }
            break;
        }
        case Op::BceMean: {
            const Tensor& s = val(n.in[0]);
            const Tensor& y = val(n.in[1]);
            double* gs = grad_of(n.in[0]).data();
            double eps = n.c0;
            double go = g[0] / static_cast<double>(s.size());
            for (std::size_t i = 0; i < s.size(); ++i) {
                // zero slope where the clamp is active
                if (s[i] <= eps || s[i] >= 1.0 - eps) continue;
                gs[i] += go * (-(y[i] / s[i]) + (1.0 - y[i]) / (1.0 - s[i]));
            }
            break;
        }
        case Op::MeanScalars: {
            double inv = g[0] / static_cast<double>(n.in.size());
            for (NodeId src : n.in) grad_of(src)[0] += inv;
            break;
        }
        }
    }

    GradMap out;
    for (const std::string& name : params.names()) {
        if (!prefix.empty() && name.rfind(prefix, 0) != 0) continue;
        out.emplace(name, Tensor(params.get(name).shape()));
    }
    for (const auto& [name, id] : param_nodes_) {
        if (!live[id]) continue;
        auto it = out.find(name);
        if (it == out.end()) continue;
        it->second = std::move(grads[id]);
    }
    return out;
}

} // namespace wam::core
