#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "uot/rng.hpp"
#include "uot/tape.hpp"

using namespace uot;

namespace {

// independent oracle: central finite difference
double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

} // namespace

TEST_CASE("record: elementary op values and partials") {
    Tape t;
    const NodeId a = t.leaf(2.0), b = t.leaf(3.0);

    const NodeId s = t.add(a, b);
    CHECK(t.value(s) == doctest::Approx(5.0));
    t.backward(s);
    CHECK(t.adjoint(a) == doctest::Approx(1.0));
    CHECK(t.adjoint(b) == doctest::Approx(1.0));

    const NodeId p = t.mul(a, b);
    CHECK(t.value(p) == doctest::Approx(6.0));
    t.backward(p);
    CHECK(t.adjoint(a) == doctest::Approx(3.0));
    CHECK(t.adjoint(b) == doctest::Approx(2.0));

    const NodeId z = t.leaf(0.0);
    const NodeId e = t.exp(z);
    CHECK(t.value(e) == doctest::Approx(1.0));
    t.backward(e);
    CHECK(t.adjoint(z) == doctest::Approx(1.0));
}

TEST_CASE("record: unknown input id is rejected") {
    Tape t;
    t.leaf(1.0);
    CHECK_THROWS(t.add(0, 57));
    const NodeId in[2] = {0, 99};
    const double pa[2] = {1.0, 1.0};
    CHECK_THROWS(t.record(Op::Add, in, 0.0, pa));
}

TEST_CASE("backward: basic adjoints") {
    Tape t;
    const NodeId x = t.leaf(3.0);
    const NodeId y = t.pow2(x);
    t.backward(y);
    CHECK(t.adjoint(x) == doctest::Approx(6.0));

    Tape t2;
    const NodeId u = t2.leaf(0.0);
    const NodeId r = t2.exp(t2.neg(u));
    t2.backward(r);
    CHECK(t2.adjoint(u) == doctest::Approx(-1.0));
}

TEST_CASE("backward: KL conjugate of -v, checked against finite differences") {
    // d/dv [exp(-v) - 1] at v = 0.5
    auto f = [](double v) { return std::expm1(-v); };
    const double fd = central_diff(f, 0.5);

    Tape t;
    const NodeId v = t.leaf(0.5);
    const NodeId loss = t.sub(t.exp(t.neg(v)), t.constant(1.0));
    t.backward(loss);
    CHECK(t.adjoint(v) == doctest::Approx(-std::exp(-0.5)).epsilon(1e-12));
    CHECK(t.adjoint(v) == doctest::Approx(fd).epsilon(1e-7));
}

TEST_CASE("backward: adjoints are additive over independent roots") {
    Tape t;
    const NodeId x = t.leaf(0.7), y = t.leaf(-1.2);
    const NodeId r1 = t.mul(t.exp(x), y);
    const NodeId r2 = t.tanh(t.mul(x, y));
    const NodeId both = t.add(r1, r2);

    t.backward(r1);
    const double ax1 = t.adjoint(x), ay1 = t.adjoint(y);
    t.backward(r2);
    const double ax2 = t.adjoint(x), ay2 = t.adjoint(y);
    t.backward(both);
    CHECK(t.adjoint(x) == doctest::Approx(ax1 + ax2).epsilon(1e-12));
    CHECK(t.adjoint(y) == doctest::Approx(ay1 + ay2).epsilon(1e-12));
}

TEST_CASE("every elementary op matches central differences on random inputs") {
    struct OpCase {
        const char* name;
        std::function<NodeId(Tape&, NodeId)> build;
        std::function<double(double)> eval;
        double lo, hi;
    };
    const std::vector<OpCase> cases = {
        {"neg", [](Tape& t, NodeId a) { return t.neg(a); },
         [](double x) { return -x; }, -3, 3},
        {"exp", [](Tape& t, NodeId a) { return t.exp(a); },
         [](double x) { return std::exp(x); }, -3, 3},
        {"log", [](Tape& t, NodeId a) { return t.log(a); },
         [](double x) { return std::log(x); }, 0.1, 5},
        {"pow2", [](Tape& t, NodeId a) { return t.pow2(a); },
         [](double x) { return x * x; }, -3, 3},
        {"sqrt", [](Tape& t, NodeId a) { return t.sqrt(a); },
         [](double x) { return std::sqrt(x); }, 0.1, 5},
        {"tanh", [](Tape& t, NodeId a) { return t.tanh(a); },
         [](double x) { return std::tanh(x); }, -3, 3},
        {"sigmoid", [](Tape& t, NodeId a) { return t.sigmoid(a); },
         [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, -3, 3},
        {"silu", [](Tape& t, NodeId a) { return t.silu(a); },
         [](double x) { return x / (1.0 + std::exp(-x)); }, -3, 3},
        {"relu", [](Tape& t, NodeId a) { return t.relu(a); },
         [](double x) { return x > 0 ? x : 0.0; }, 0.2, 3},  // away from the kink
    };

    Rng rng(7);
    for (const auto& c : cases) {
        for (int rep = 0; rep < 100; ++rep) {
            const double x = c.lo + (c.hi - c.lo) * rng.uniform();
            Tape t;
            const NodeId a = t.leaf(x);
            t.backward(c.build(t, a));
            const double fd = central_diff(c.eval, x);
            const double err = std::abs(t.adjoint(a) - fd) / std::max(1.0, std::abs(fd));
            CHECK_MESSAGE(err < 1e-4, c.name, " at x=", x);
        }
    }

    // two-input ops
    for (int rep = 0; rep < 100; ++rep) {
        const double x = -2 + 4 * rng.uniform();
        const double y = 0.5 + 2 * rng.uniform();
        {
            Tape t;
            const NodeId a = t.leaf(x), b = t.leaf(y);
            t.backward(t.mul(a, b));
            CHECK(t.adjoint(a) == doctest::Approx(y).epsilon(1e-10));
            CHECK(t.adjoint(b) == doctest::Approx(x).epsilon(1e-10));
        }
        {
            Tape t;
            const NodeId a = t.leaf(x), b = t.leaf(y);
            t.backward(t.div(a, b));
            CHECK(t.adjoint(a) == doctest::Approx(1.0 / y).epsilon(1e-10));
            CHECK(t.adjoint(b) == doctest::Approx(-x / (y * y)).epsilon(1e-10));
        }
    }
}

TEST_CASE("sum and dot adjoints") {
    Tape t;
    std::vector<NodeId> xs = {t.leaf(1.0), t.leaf(2.0), t.leaf(3.0)};
    const NodeId s = t.sum(xs);
    CHECK(t.value(s) == doctest::Approx(6.0));
    t.backward(s);
    for (NodeId id : xs) CHECK(t.adjoint(id) == doctest::Approx(1.0));

    std::vector<NodeId> a = {t.leaf(1.0), t.leaf(-2.0)};
    std::vector<NodeId> b = {t.leaf(3.0), t.leaf(0.5)};
    const NodeId d = t.dot(a, b);
    CHECK(t.value(d) == doctest::Approx(1.0 * 3.0 - 2.0 * 0.5));
    t.backward(d);
    CHECK(t.adjoint(a[0]) == doctest::Approx(3.0));
    CHECK(t.adjoint(a[1]) == doctest::Approx(0.5));
    CHECK(t.adjoint(b[0]) == doctest::Approx(1.0));
    CHECK(t.adjoint(b[1]) == doctest::Approx(-2.0));
}

TEST_CASE("grad_norm_sq: linear and quadratic roots") {
    {
        // root = w*y with w = 3: |grad_y|^2 = 9
        Tape t;
        const NodeId w = t.leaf(3.0), y = t.leaf(1.7);
        const NodeId root = t.mul(w, y);
        const NodeId g = t.grad_norm_sq(root, {&y, 1});
        CHECK(t.value(g) == doctest::Approx(9.0));
    }
    {
        // root = y^2 at y = 2: (2y)^2 = 16
        Tape t;
        const NodeId y = t.leaf(2.0);
        const NodeId g = t.grad_norm_sq(t.pow2(y), {&y, 1});
        CHECK(t.value(g) == doctest::Approx(16.0));
    }
    {
        // root = tanh(y) at y = 0: penalty (1-tanh^2)^2 = 1 and its own
        // derivative w.r.t. y vanishes at 0
        Tape t;
        const NodeId y = t.leaf(0.0);
        const NodeId g = t.grad_norm_sq(t.tanh(y), {&y, 1});
        CHECK(t.value(g) == doctest::Approx(1.0));
        t.backward(g);
        CHECK(t.adjoint(y) == doctest::Approx(0.0));

        auto penalty = [](double yv) {
            const double d = 1.0 - std::tanh(yv) * std::tanh(yv);
            return d * d;
        };
        CHECK(t.adjoint(y) == doctest::Approx(central_diff(penalty, 0.0)).epsilon(1e-6));
    }
}

TEST_CASE("grad_norm_sq rejects non-leaf wrt nodes") {
    Tape t;
    const NodeId y = t.leaf(1.0);
    const NodeId e = t.exp(y);
    const NodeId root = t.pow2(e);
    CHECK_THROWS(t.grad_norm_sq(root, {&e, 1}));
}

TEST_CASE("second-order path: parameter gradient of the penalty matches FD") {
    // small two-layer net v(y) = sum_j w2_j silu(w1_j y + b1_j); the
    // penalty is |dv/dy|^2 and we differentiate it w.r.t. the parameters.
    const int H = 4;
    Rng rng(21);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> p(3 * H);
        for (double& v : p) v = rng.normal();
        const double yv = rng.normal();

        auto penalty_value = [&](const std::vector<double>& q) {
            Tape t;
            const NodeId y = t.leaf(yv);
            std::vector<NodeId> terms(H);
            for (int j = 0; j < H; ++j) {
                const NodeId w1 = t.leaf(q[j]), b1 = t.leaf(q[H + j]), w2 = t.leaf(q[2 * H + j]);
                terms[j] = t.mul(w2, t.silu(t.add(t.mul(w1, y), b1)));
            }
            const NodeId v = t.sum(terms);
            return t.value(t.grad_norm_sq(v, {&y, 1}));
        };

        // autodiff gradient of the penalty
        Tape t;
        const NodeId y = t.leaf(yv);
        std::vector<NodeId> leaves;
        std::vector<NodeId> terms(H);
        for (int j = 0; j < H; ++j) {
            const NodeId w1 = t.leaf(p[j]), b1 = t.leaf(p[H + j]), w2 = t.leaf(p[2 * H + j]);
            leaves.insert(leaves.end(), {w1, b1, w2});
            terms[j] = t.mul(w2, t.silu(t.add(t.mul(w1, y), b1)));
        }
        const NodeId v = t.sum(terms);
        const NodeId pen = t.grad_norm_sq(v, {&y, 1});
        t.backward(pen);

        for (int j = 0; j < 3 * H; ++j) {
            // map leaf order back to p index
            const int block = j % 3;   // 0:w1, 1:b1, 2:w2
            const int unit = j / 3;
            const int pidx = block * H + unit;
            auto f = [&](double val) {
                std::vector<double> q = p;
                q[pidx] = val;
                return penalty_value(q);
            };
            const double fd = central_diff(f, p[pidx]);
            const double ad = t.adjoint(leaves[j]);
            const double err = std::abs(ad - fd) / std::max(1.0, std::abs(fd));
            CHECK_MESSAGE(err < 1e-3, "param ", pidx, " rep ", rep);
        }
    }
}

TEST_CASE("rewind truncates and allows rebuilding") {
    Tape t;
    const NodeId a = t.leaf(1.5);
    const std::size_t mark = t.size();
    const NodeId r1 = t.pow2(a);
    t.backward(r1);
    CHECK(t.adjoint(a) == doctest::Approx(3.0));

    t.rewind(mark);
    CHECK(t.size() == mark);
    const NodeId r2 = t.exp(a);
    t.backward(r2);
    CHECK(t.adjoint(a) == doctest::Approx(std::exp(1.5)));
}
