#include "uot/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace uot {

void Tape::check_input(NodeId id) const {
    if (id >= meta_.size())
        throw std::invalid_argument("tape: unknown input node id");
}

NodeId Tape::push(Op op, double value, std::span<const NodeId> parents,
                  std::span<const double> partials) {
    const auto off = static_cast<std::uint32_t>(parent_ids_.size());
    parent_ids_.insert(parent_ids_.end(), parents.begin(), parents.end());
    parent_partials_.insert(parent_partials_.end(), partials.begin(), partials.end());
    meta_.push_back({op, off, static_cast<std::uint32_t>(parents.size())});
    values_.push_back(value);
    return static_cast<NodeId>(meta_.size() - 1);
}

NodeId Tape::record(Op op, std::span<const NodeId> inputs, double value,
                    std::span<const double> partials) {
    if (inputs.size() != partials.size())
        throw std::invalid_argument("tape: record needs one partial per input");
    for (NodeId id : inputs) check_input(id);
    return push(op, value, inputs, partials);
}

NodeId Tape::add(NodeId a, NodeId b) {
    check_input(a); check_input(b);
    const NodeId in[2] = {a, b};
    const double pa[2] = {1.0, 1.0};
    return push(Op::Add, values_[a] + values_[b], in, pa);
}

NodeId Tape::sub(NodeId a, NodeId b) {
    check_input(a); check_input(b);
    const NodeId in[2] = {a, b};
    const double pa[2] = {1.0, -1.0};
    return push(Op::Sub, values_[a] - values_[b], in, pa);
}

NodeId Tape::mul(NodeId a, NodeId b) {
    check_input(a); check_input(b);
    const NodeId in[2] = {a, b};
    const double pa[2] = {values_[b], values_[a]};
    return push(Op::Mul, values_[a] * values_[b], in, pa);
}

NodeId Tape::div(NodeId a, NodeId b) {
    check_input(a); check_input(b);
    const double vb = values_[b];
    const double v = values_[a] / vb;
    const NodeId in[2] = {a, b};
    const double pa[2] = {1.0 / vb, -v / vb};
    return push(Op::Div, v, in, pa);
}

NodeId Tape::neg(NodeId a) {
    check_input(a);
    const double pa[1] = {-1.0};
    return push(Op::Neg, -values_[a], {&a, 1}, pa);
}

NodeId Tape::exp(NodeId a) {
    check_input(a);
    const double v = std::exp(values_[a]);
    const double pa[1] = {v};
    return push(Op::Exp, v, {&a, 1}, pa);
}

NodeId Tape::log(NodeId a) {
    check_input(a);
    const double pa[1] = {1.0 / values_[a]};
    return push(Op::Log, std::log(values_[a]), {&a, 1}, pa);
}

NodeId Tape::pow2(NodeId a) {
    check_input(a);
    const double va = values_[a];
    const double pa[1] = {2.0 * va};
    return push(Op::Pow2, va * va, {&a, 1}, pa);
}

NodeId Tape::sqrt(NodeId a) {
    check_input(a);
    const double v = std::sqrt(values_[a]);
    const double pa[1] = {0.5 / v};
    return push(Op::Sqrt, v, {&a, 1}, pa);
}

NodeId Tape::tanh(NodeId a) {
    check_input(a);
    const double v = std::tanh(values_[a]);
    const double pa[1] = {1.0 - v * v};
    return push(Op::Tanh, v, {&a, 1}, pa);
}

static double sigmoid_val(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
}

NodeId Tape::sigmoid(NodeId a) {
    check_input(a);
    const double v = sigmoid_val(values_[a]);
    const double pa[1] = {v * (1.0 - v)};
    return push(Op::Sigmoid, v, {&a, 1}, pa);
}

NodeId Tape::silu(NodeId a) {
    check_input(a);
    const double x = values_[a];
    const double s = sigmoid_val(x);
    const double pa[1] = {s * (1.0 + x * (1.0 - s))};
    return push(Op::Silu, x * s, {&a, 1}, pa);
}

NodeId Tape::relu(NodeId a) {
    check_input(a);
    const double x = values_[a];
    const double pa[1] = {x > 0.0 ? 1.0 : 0.0};
    return push(Op::Relu, x > 0.0 ? x : 0.0, {&a, 1}, pa);
}

NodeId Tape::sum(std::span<const NodeId> xs) {
    double v = 0.0;
    for (NodeId id : xs) {
        check_input(id);
        v += values_[id];
    }
    if (ones_scratch_.size() < xs.size()) ones_scratch_.resize(xs.size(), 1.0);
    return push(Op::Sum, v, xs, {ones_scratch_.data(), xs.size()});
}

NodeId Tape::dot(std::span<const NodeId> a, std::span<const NodeId> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("tape: dot needs equal-length inputs");
    const std::size_t k = a.size();
    double v = 0.0;
    auto& in = id_scratch_;
    auto& pa = partial_scratch_;
    in.resize(2 * k);
    pa.resize(2 * k);
    for (std::size_t i = 0; i < k; ++i) {
        check_input(a[i]); check_input(b[i]);
        in[i] = a[i];
        in[k + i] = b[i];
        pa[i] = values_[b[i]];      // d/da_i
        pa[k + i] = values_[a[i]];  // d/db_i
        v += values_[a[i]] * values_[b[i]];
    }
    return push(Op::Dot, v, in, pa);
}

void Tape::backward(NodeId root) {
    check_input(root);
    adjoints_.assign(meta_.size(), 0.0);
    adjoints_[root] = 1.0;
    for (std::uint32_t n = root + 1; n-- > 0;) {
        const double a = adjoints_[n];
        if (a == 0.0) continue;
        const Meta& m = meta_[n];
        const NodeId* ids = parent_ids_.data() + m.parent_off;
        const double* pp = parent_partials_.data() + m.parent_off;
        for (std::uint32_t e = 0; e < m.parent_cnt; ++e)
            adjoints_[ids[e]] += a * pp[e];
    }
}

std::vector<NodeId> Tape::backward_graph(NodeId root, std::span<const NodeId> wrt) {
    check_input(root);
    for (NodeId id : wrt) check_input(id);

    // Only nodes that depend on some wrt node can carry gradient into the
    // result; adjoint nodes for anything else (e.g. other leaves feeding
    // the same root) would be dead weight on the tape.
    auto& relevant = relevance_scratch_;
    relevant.assign(root + 1, 0);
    for (NodeId id : wrt)
        if (id <= root) relevant[id] = 1;
    for (NodeId n = 0; n <= root; ++n) {
        if (relevant[n]) continue;
        const Meta& m = meta_[n];
        const NodeId* ids = parent_ids_.data() + m.parent_off;
        for (std::uint32_t e = 0; e < m.parent_cnt; ++e)
            if (relevant[ids[e]]) {
                relevant[n] = 1;
                break;
            }
    }

    // adj[n]: node computing d root / d n. Contributions from children are
    // gathered per node and merged with one sum, in reverse creation order
    // (all children of n have larger ids, so they are processed first).
    auto& adj = adj_node_scratch_;
    adj.assign(root + 1, kInvalidNode);
    if (contrib_scratch_.size() < static_cast<std::size_t>(root) + 1)
        contrib_scratch_.resize(root + 1);

    std::vector<NodeId> out(wrt.size(), kInvalidNode);
    if (!relevant[root]) {
        for (NodeId& o : out) o = constant(0.0);
        return out;
    }

    auto contribute = [&](NodeId p, NodeId node) {
        if (relevant[p]) contrib_scratch_[p].push_back(node);
    };

    for (std::uint32_t n = root + 1; n-- > 0;) {
        if (!relevant[n]) continue;
        NodeId an;
        if (n == root) {
            an = constant(1.0);
        } else {
            auto& c = contrib_scratch_[n];
            if (c.empty()) continue;  // no path from n up to the root
            an = c.size() == 1 ? c[0] : sum(c);
            c.clear();
        }
        adj[n] = an;
        const Meta m = meta_[n];  // copy: pushes below may reallocate meta_
        if (m.parent_cnt == 0) continue;
        const std::uint32_t off = m.parent_off;
        auto parent = [&](std::uint32_t e) { return parent_ids_[off + e]; };

        switch (m.op) {
        case Op::Add:
            contribute(parent(0), an);
            contribute(parent(1), an);
            break;
        case Op::Sub:
            contribute(parent(0), an);
            if (relevant[parent(1)]) contribute(parent(1), neg(an));
            break;
        case Op::Mul:
            if (relevant[parent(0)]) contribute(parent(0), mul(an, parent(1)));
            if (relevant[parent(1)]) contribute(parent(1), mul(an, parent(0)));
            break;
        case Op::Div:
            // n = a/b: d/da = 1/b, d/db = -n/b
            if (relevant[parent(0)]) contribute(parent(0), div(an, parent(1)));
            if (relevant[parent(1)])
                contribute(parent(1), neg(div(mul(an, n), parent(1))));
            break;
        case Op::Neg:
            contribute(parent(0), neg(an));
            break;
        case Op::Exp:
            contribute(parent(0), mul(an, n));
            break;
        case Op::Log:
            contribute(parent(0), div(an, parent(0)));
            break;
        case Op::Pow2:
            contribute(parent(0), mul(an, add(parent(0), parent(0))));
            break;
        case Op::Sqrt:
            contribute(parent(0), div(an, add(n, n)));
            break;
        case Op::Tanh:
            contribute(parent(0), mul(an, sub(constant(1.0), pow2(n))));
            break;
        case Op::Sigmoid:
            // d = s(1-s) with s the node itself
            contribute(parent(0), mul(an, mul(n, sub(constant(1.0), n))));
            break;
        case Op::Silu: {
            // n = x*s(x); d = s + n - n*s
            const NodeId s = sigmoid(parent(0));
            contribute(parent(0), mul(an, add(s, sub(n, mul(n, s)))));
            break;
        }
        case Op::Relu:
            // step(x) is locally constant; second derivative is 0 a.e.
            contribute(parent(0), mul(an, constant(values_[parent(0)] > 0.0 ? 1.0 : 0.0)));
            break;
        case Op::Sum:
            for (std::uint32_t e = 0; e < m.parent_cnt; ++e)
                contribute(parent(e), an);
            break;
        case Op::Dot: {
            const std::uint32_t k = m.parent_cnt / 2;
            for (std::uint32_t e = 0; e < k; ++e) {
                if (relevant[parent(e)]) contribute(parent(e), mul(an, parent(k + e)));
                if (relevant[parent(k + e)]) contribute(parent(k + e), mul(an, parent(e)));
            }
            break;
        }
        case Op::Leaf:
        case Op::Const:
            break;
        }
    }

    for (std::size_t i = 0; i < wrt.size(); ++i) {
        const NodeId id = wrt[i];
        out[i] = (id <= root && adj[id] != kInvalidNode) ? adj[id] : constant(0.0);
    }
    return out;
}

NodeId Tape::grad_norm_sq(NodeId root, std::span<const NodeId> wrt) {
    for (NodeId id : wrt) {
        check_input(id);
        if (!is_leaf(id))
            throw std::invalid_argument("grad_norm_sq: wrt nodes must be leaves");
    }
    std::vector<NodeId> grads = backward_graph(root, wrt);
    for (NodeId& g : grads) g = pow2(g);
    if (grads.size() == 1) return grads[0];
    return sum(grads);
}

void Tape::rewind(std::size_t n) {
    if (n >= meta_.size()) return;
    const std::uint32_t edge_off = meta_[n].parent_off;
    meta_.resize(n);
    values_.resize(n);
    if (adjoints_.size() > n) adjoints_.resize(n);
    parent_ids_.resize(edge_off);
    parent_partials_.resize(edge_off);
}

} // namespace uot
