#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "uot/entropy.hpp"
#include "uot/rng.hpp"

using namespace uot;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
const Entropy kAll[] = {Entropy::Identity, Entropy::KL, Entropy::Chi2, Entropy::Softplus};
} // namespace

TEST_CASE("psi_star pointwise values") {
    CHECK(psi_star(Entropy::KL, 0.0) == doctest::Approx(0.0));
    CHECK(psi_star(Entropy::Chi2, -3.0) == doctest::Approx(-1.0));
    CHECK(psi_star(Entropy::Chi2, 2.0) == doctest::Approx(3.0));  // 4/4 + 2
    CHECK(psi_star(Entropy::Softplus, 0.0) == doctest::Approx(std::log(2.0)));
    CHECK(psi_star(Entropy::Identity, 7.25) == doctest::Approx(7.25));
    // overflow-safe forms stay finite where doubles allow
    CHECK(std::isfinite(psi_star(Entropy::Softplus, 800.0)));
    CHECK(psi_star(Entropy::Softplus, 800.0) == doctest::Approx(800.0));
}

TEST_CASE("psi_star_prime pointwise values") {
    CHECK(psi_star_prime(Entropy::KL, 0.0) == doctest::Approx(1.0));
    CHECK(psi_star_prime(Entropy::Identity, 7.3) == doctest::Approx(1.0));
    CHECK(psi_star_prime(Entropy::Chi2, -2.0) == doctest::Approx(0.0));
    CHECK(psi_star_prime(Entropy::Softplus, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("psi pointwise values") {
    CHECK(psi(Entropy::KL, 1.0) == doctest::Approx(0.0));
    CHECK(psi(Entropy::Chi2, 0.0) == doctest::Approx(1.0));
    CHECK(psi(Entropy::KL, 0.0) == doctest::Approx(1.0));
    CHECK(psi(Entropy::KL, -0.5) == kInf);
    CHECK(psi(Entropy::Chi2, -0.1) == kInf);
    CHECK(psi(Entropy::Identity, 1.0) == doctest::Approx(0.0));
    CHECK(psi(Entropy::Identity, 1.001) == kInf);
    // softplus psi is a numerical biconjugate: finite only on [0,1],
    // symmetric entropy-like values inside
    CHECK(psi(Entropy::Softplus, -0.2) == kInf);
    CHECK(psi(Entropy::Softplus, 1.7) == kInf);
    CHECK(psi(Entropy::Softplus, 0.5) == doctest::Approx(-std::log(2.0)).epsilon(1e-6));
    CHECK(psi(Entropy::Softplus, 0.0) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("csiszar_divergence on aligned supports") {
    const DiscreteMeasure ref{{0.0, 1.0}, {0.5, 0.5}};
    const DiscreteMeasure same = ref;
    CHECK(csiszar_divergence(Entropy::KL, same, ref) == doctest::Approx(0.0));
    CHECK(csiszar_divergence(Entropy::Chi2, same, ref) == doctest::Approx(0.0));

    // hand sum: 0.5*psi(0.5) + 0.5*psi(1.5) with psi(t) = t ln t - t + 1
    const DiscreteMeasure rho{{0.0, 1.0}, {0.25, 0.75}};
    CHECK(csiszar_divergence(Entropy::KL, rho, ref) == doctest::Approx(0.130812).epsilon(1e-5));

    // chi2: psi(0) = 1, psi(2) = 1
    const DiscreteMeasure rho2{{0.0, 1.0}, {0.0, 1.0}};
    CHECK(csiszar_divergence(Entropy::Chi2, rho2, ref) == doctest::Approx(1.0));

    const DiscreteMeasure misaligned{{0.0, 2.0}, {0.25, 0.75}};
    CHECK_THROWS(csiszar_divergence(Entropy::KL, rho, misaligned));
    const DiscreteMeasure shorter{{0.0}, {1.0}};
    CHECK_THROWS(csiszar_divergence(Entropy::KL, shorter, ref));

    // singular part: mass where the reference has none
    const DiscreteMeasure zero_ref{{0.0, 1.0}, {1.0, 0.0}};
    const DiscreteMeasure leaky{{0.0, 1.0}, {0.9, 0.1}};
    CHECK(csiszar_divergence(Entropy::KL, leaky, zero_ref) == kInf);
}

TEST_CASE("conjugate_bruteforce matches closed forms") {
    CHECK(conjugate_bruteforce(Entropy::KL, 0.0, 0.0, 10.0, 100000) ==
          doctest::Approx(0.0).epsilon(1e-6));
    CHECK(conjugate_bruteforce(Entropy::Chi2, 2.0, 0.0, 10.0, 100000) ==
          doctest::Approx(3.0).epsilon(1e-6));
    CHECK(conjugate_bruteforce(Entropy::KL, 1.0, 0.0, 10.0, 100000) ==
          doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-6));
    CHECK_THROWS(conjugate_bruteforce(Entropy::KL, 0.0, 0.0, 1.0, 0));
}

TEST_CASE("conjugacy: psi_star equals the grid conjugate on [-3,3]") {
    for (Entropy e : {Entropy::KL, Entropy::Chi2}) {
        for (double y = -3.0; y <= 3.0 + 1e-12; y += 0.1) {
            const double brute = conjugate_bruteforce(e, y, 0.0, 25.0, 500000);
            CHECK_MESSAGE(std::abs(psi_star(e, y) - brute) < 1e-3,
                          entropy_name(e), " at y=", y);
        }
    }
}

TEST_CASE("Fenchel-Young inequality on random pairs") {
    Rng rng(3);
    for (int rep = 0; rep < 1000; ++rep) {
        const double x = 5.0 * rng.uniform();
        const double y = -3.0 + 6.0 * rng.uniform();
        for (Entropy e : kAll) {
            const double p = psi(e, x);
            if (std::isinf(p)) continue;
            CHECK(x * y <= p + psi_star(e, y) + 1e-9);
        }
    }
}

TEST_CASE("psi_star is non-decreasing and midpoint convex") {
    Rng rng(11);
    for (int rep = 0; rep < 500; ++rep) {
        double x1 = -6.0 + 12.0 * rng.uniform();
        double x2 = -6.0 + 12.0 * rng.uniform();
        if (x1 > x2) std::swap(x1, x2);
        for (Entropy e : kAll) {
            CHECK(psi_star(e, x1) <= psi_star(e, x2) + 1e-12);
            const double mid = psi_star(e, 0.5 * (x1 + x2));
            CHECK(mid <= 0.5 * (psi_star(e, x1) + psi_star(e, x2)) + 1e-12);
        }
    }
}

TEST_CASE("psi_star_prime matches central differences away from the chi2 kink") {
    Rng rng(13);
    const double h = 1e-6;
    for (int rep = 0; rep < 500; ++rep) {
        const double x = -3.0 + 6.0 * rng.uniform();
        for (Entropy e : kAll) {
            if (e == Entropy::Chi2 && std::abs(x + 2.0) <= 1e-3) continue;
            const double fd = (psi_star(e, x + h) - psi_star(e, x - h)) / (2.0 * h);
            CHECK_MESSAGE(std::abs(psi_star_prime(e, x) - fd) < 1e-6,
                          entropy_name(e), " at x=", x);
        }
    }
}

TEST_CASE("psi_star_expr agrees with psi_star and psi_star_prime") {
    Rng rng(17);
    for (int rep = 0; rep < 200; ++rep) {
        const double x = -4.0 + 8.0 * rng.uniform();
        for (Entropy e : kAll) {
            Tape t;
            const NodeId xv = t.leaf(x);
            const Expr y = psi_star_expr(e, wrap(t, xv));
            CHECK(y.value() == doctest::Approx(psi_star(e, x)).epsilon(1e-12));
            t.backward(y.id);
            if (e == Entropy::Chi2 && std::abs(x + 2.0) <= 1e-3) continue;
            CHECK(t.adjoint(xv) == doctest::Approx(psi_star_prime(e, x)).epsilon(1e-9));
        }
    }
}

TEST_CASE("entropy names round-trip") {
    for (Entropy e : kAll) CHECK(entropy_from_name(entropy_name(e)) == e);
    CHECK_THROWS(entropy_from_name("hellinger"));
}

TEST_CASE("measure json round-trip and validation") {
    DiscreteMeasure m{{0.5, -1.25, 3.0}, {0.2, 0.3, 0.5}};
    const DiscreteMeasure back = measure_from_json(to_json(m));
    CHECK(back.atoms == m.atoms);
    CHECK(back.weights == m.weights);
    CHECK(m.mass() == doctest::Approx(1.0));

    DiscreteMeasure bad{{0.0}, {-0.1}};
    CHECK_THROWS(bad.validate());
    DiscreteMeasure bad2{{0.0, 1.0}, {0.5}};
    CHECK_THROWS(bad2.validate());
}
