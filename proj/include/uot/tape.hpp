#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace uot {

// Elementary operations. Sum and Dot are n-ary; everything else has a
// fixed arity. Dot stores its parents as [a_0..a_{k-1}, b_0..b_{k-1}].
enum class Op : std::uint8_t {
    Leaf, Const,
    Add, Sub, Mul, Div, Neg,
    Exp, Log, Pow2, Sqrt,
    Tanh, Sigmoid, Silu, Relu,
    Sum, Dot,
};

using NodeId = std::uint32_t;
inline constexpr NodeId kInvalidNode = 0xffffffffu;

// Reverse-mode tape over scalars. Nodes are appended in creation order,
// which is by construction a valid topological order: an operation may
// only reference nodes that already exist. Each node stores its value,
// op tag and parent edges (parent id + numeric local partial).
//
// Two backward modes:
//   backward()        numeric adjoint sweep using the stored partials.
//   backward_graph()  records the adjoint computation as new tape nodes,
//                     so the gradient itself is differentiable (used for
//                     the input-gradient penalty).
//
// A tape is a single-threaded builder; use one tape per thread.
class Tape {
public:
    Tape() = default;

    NodeId leaf(double value) { return push(Op::Leaf, value); }
    NodeId constant(double value) { return push(Op::Const, value); }

    // Low-level primitive: append a node with explicit partials.
    // Throws std::invalid_argument on unknown input ids or partial count
    // mismatch.
    NodeId record(Op op, std::span<const NodeId> inputs, double value,
                  std::span<const double> partials);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId neg(NodeId a);
    NodeId exp(NodeId a);
    NodeId log(NodeId a);
    NodeId pow2(NodeId a);
    NodeId sqrt(NodeId a);
    NodeId tanh(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId silu(NodeId a);
    NodeId relu(NodeId a);
    NodeId sum(std::span<const NodeId> xs);
    NodeId dot(std::span<const NodeId> a, std::span<const NodeId> b);

    double value(NodeId id) const { return values_[id]; }
    double adjoint(NodeId id) const { return adjoints_[id]; }
    Op op(NodeId id) const { return meta_[id].op; }
    bool is_leaf(NodeId id) const { return meta_[id].op == Op::Leaf; }
    std::size_t size() const { return meta_.size(); }

    // Numeric reverse sweep from root. Adjoints are reset first, so after
    // the call adjoint(n) == d root / d n for every node n.
    void backward(NodeId root);

    // Records the gradient of root w.r.t. each node in wrt as new nodes on
    // this tape and returns their ids. Nodes with no path to the root get
    // a Const(0) node.
    std::vector<NodeId> backward_graph(NodeId root, std::span<const NodeId> wrt);

    // sum_i (d root / d wrt_i)^2 as a differentiable node. root must be
    // scalar (any node is) and every wrt entry must be a leaf.
    NodeId grad_norm_sq(NodeId root, std::span<const NodeId> wrt);

    // Truncate the tape back to n nodes. Used to reuse one tape across
    // the samples of a batch chunk: place shared leaves once, mark, then
    // rewind after each sample.
    void rewind(std::size_t n);
    void reset() { rewind(0); }

private:
    struct Meta {
        Op op;
        std::uint32_t parent_off;
        std::uint32_t parent_cnt;
    };

    NodeId push(Op op, double value) {
        meta_.push_back({op, static_cast<std::uint32_t>(parent_ids_.size()), 0});
        values_.push_back(value);
        return static_cast<NodeId>(meta_.size() - 1);
    }
    NodeId push(Op op, double value, std::span<const NodeId> parents,
                std::span<const double> partials);
    void check_input(NodeId id) const;

    std::vector<Meta> meta_;
    std::vector<double> values_;
    std::vector<double> adjoints_;
    std::vector<NodeId> parent_ids_;
    std::vector<double> parent_partials_;
    // reusable scratch; a tape is single-threaded so plain members are fine
    std::vector<NodeId> adj_node_scratch_;
    std::vector<std::uint8_t> relevance_scratch_;
    std::vector<std::vector<NodeId>> contrib_scratch_;
    std::vector<NodeId> id_scratch_;
    std::vector<double> partial_scratch_;
    std::vector<double> ones_scratch_;
};

// Thin value-semantics handle for readable expression building.
struct Expr {
    Tape* tape = nullptr;
    NodeId id = kInvalidNode;

    double value() const { return tape->value(id); }
};

inline Expr wrap(Tape& t, NodeId id) { return {&t, id}; }
inline Expr lit(Tape& t, double v) { return {&t, t.constant(v)}; }

inline Expr operator+(Expr a, Expr b) { return {a.tape, a.tape->add(a.id, b.id)}; }
inline Expr operator-(Expr a, Expr b) { return {a.tape, a.tape->sub(a.id, b.id)}; }
inline Expr operator*(Expr a, Expr b) { return {a.tape, a.tape->mul(a.id, b.id)}; }
inline Expr operator/(Expr a, Expr b) { return {a.tape, a.tape->div(a.id, b.id)}; }
inline Expr operator-(Expr a) { return {a.tape, a.tape->neg(a.id)}; }
inline Expr operator+(Expr a, double b) { return a + lit(*a.tape, b); }
inline Expr operator+(double a, Expr b) { return lit(*b.tape, a) + b; }
inline Expr operator-(Expr a, double b) { return a - lit(*a.tape, b); }
inline Expr operator-(double a, Expr b) { return lit(*b.tape, a) - b; }
inline Expr operator*(Expr a, double b) { return a * lit(*a.tape, b); }
inline Expr operator*(double a, Expr b) { return lit(*b.tape, a) * b; }

inline Expr exp(Expr a) { return {a.tape, a.tape->exp(a.id)}; }
inline Expr log(Expr a) { return {a.tape, a.tape->log(a.id)}; }
inline Expr pow2(Expr a) { return {a.tape, a.tape->pow2(a.id)}; }
inline Expr sqrt(Expr a) { return {a.tape, a.tape->sqrt(a.id)}; }
inline Expr tanh(Expr a) { return {a.tape, a.tape->tanh(a.id)}; }
inline Expr sigmoid(Expr a) { return {a.tape, a.tape->sigmoid(a.id)}; }
inline Expr silu(Expr a) { return {a.tape, a.tape->silu(a.id)}; }
inline Expr relu(Expr a) { return {a.tape, a.tape->relu(a.id)}; }

} // namespace uot
