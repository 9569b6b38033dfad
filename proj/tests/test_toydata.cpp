#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "uot/rng.hpp"
#include "uot/toydata.hpp"

using namespace uot;

namespace {

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::vector<double> gaussian_samples(std::size_t n, double mu, double sigma,
                                     std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (double& v : out) v = mu + sigma * rng.normal();
    return out;
}

} // namespace

TEST_CASE("sample_toy determinism and validation") {
    const ToySpec spec{ToyDataset::MatchTarget1D, 512, 9, 1};
    const SampleSet a = sample_toy(spec);
    const SampleSet b = sample_toy(spec);
    CHECK(a.points == b.points);  // bitwise

    ToySpec other = spec;
    other.seed = 10;
    CHECK(sample_toy(other).points != a.points);

    ToySpec bad = spec;
    bad.n = 0;
    CHECK_THROWS(sample_toy(bad));
}

TEST_CASE("outlier mixture mass below zero matches the mixture CDF") {
    // P(X < 0) = 0.99 Phi(-2) + 0.01 Phi(2) = 0.032295
    const ToySpec spec{ToyDataset::Outlier1D, 4000, 3, 1};
    const SampleSet s = sample_toy(spec);
    const double frac = mode_mass(s.points, 0.0, Side::Below);
    const double expect = 0.99 * 0.5 * std::erfc(2.0 / std::sqrt(2.0)) +
                          0.01 * (1.0 - 0.5 * std::erfc(2.0 / std::sqrt(2.0)));
    CHECK(expect == doctest::Approx(0.032295).epsilon(1e-3));
    const double se = std::sqrt(expect * (1.0 - expect) / 4000.0);
    CHECK(std::abs(frac - expect) < 3.0 * se + 1e-9);
}

TEST_CASE("mixture moments match analytic values within 3 standard errors") {
    struct Case {
        ToyDataset d;
        double mean, var;
    };
    // mixture mean/variance from component moments
    const Case cases[] = {
        {ToyDataset::Outlier1D, 0.98, 0.25 + (1.0 - 0.98 * 0.98)},
        {ToyDataset::MatchSource1D, 0.0, 0.25 + 1.0},
        {ToyDataset::MatchTarget1D, 1.0, 0.25 + (1.0 / 3.0 + 4.0 * 2.0 / 3.0 - 1.0)},
    };
    for (const auto& c : cases) {
        const SampleSet s = sample_toy({c.d, 4000, 17, 1});
        const double m = mean(s.points);
        const double se = std::sqrt(c.var / 4000.0);
        CHECK_MESSAGE(std::abs(m - c.mean) < 3.0 * se, toy_dataset_name(c.d));
    }
    // MatchSource is symmetric: |mean| < 0.05 at n = 4000
    const SampleSet sym = sample_toy({ToyDataset::MatchSource1D, 4000, 29, 1});
    CHECK(std::abs(mean(sym.points)) < 0.05);

    const SampleSet nd = sample_toy({ToyDataset::StdNormal, 2000, 5, 3});
    CHECK(nd.dim == 3);
    CHECK(nd.points.size() == 6000);
    CHECK(std::abs(mean(nd.points)) < 3.0 / std::sqrt(6000.0));
}

TEST_CASE("knn_kl_estimate: frozen hand instance") {
    // p = {0,1,3}, q = {0.5,2,4}, k = 2:
    // (1/3)[ln(2/3) + ln(1/2) + ln(1/3)] + ln(3/2)
    const std::vector<double> p = {0.0, 1.0, 3.0};
    const std::vector<double> q = {0.5, 2.0, 4.0};
    const double got = knn_kl_estimate(p, 3, q, 3, 1, 2);
    CHECK(got == doctest::Approx(-0.326943084337242).epsilon(1e-9));
}

TEST_CASE("knn_kl_estimate: same distribution concentrates near zero") {
    double acc = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        const auto p = gaussian_samples(4000, 0.0, 1.0, 100 + seed);
        const auto q = gaussian_samples(4000, 0.0, 1.0, 200 + seed);
        acc += knn_kl_estimate(p, 4000, q, 4000, 1, 2, ExecPolicy::Parallel);
    }
    CHECK(std::abs(acc / 10.0) < 0.05);
}

TEST_CASE("knn_kl_estimate: unit-variance mean shift gives ~0.5") {
    double acc = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        const auto p = gaussian_samples(4000, 0.0, 1.0, 300 + seed);
        const auto q = gaussian_samples(4000, 1.0, 1.0, 400 + seed);
        acc += knn_kl_estimate(p, 4000, q, 4000, 1, 2, ExecPolicy::Parallel);
    }
    CHECK(std::abs(acc / 10.0 - 0.5) < 0.1);
}

TEST_CASE("knn_kl_estimate: serial equals parallel bitwise") {
    const auto p = gaussian_samples(600, 0.0, 1.0, 7);
    const auto q = gaussian_samples(500, 0.5, 1.2, 8);
    const double a = knn_kl_estimate(p, 600, q, 500, 1, 2, ExecPolicy::Serial);
    const double b = knn_kl_estimate(p, 600, q, 500, 1, 2, ExecPolicy::Parallel);
    CHECK(a == b);
}

TEST_CASE("knn_kl_estimate input validation") {
    const std::vector<double> p = {0.0, 1.0, 2.0};
    CHECK_THROWS(knn_kl_estimate(p, 3, p, 3, 1, 3));   // need n > k
    CHECK_THROWS(knn_kl_estimate(p, 2, p, 3, 1, 2));   // buffer mismatch
}

TEST_CASE("monotonicity_score") {
    using P = std::pair<double, double>;
    const std::vector<P> id = {{0, 0}, {1, 1}, {2, 2}};
    CHECK(monotonicity_score(id) == doctest::Approx(1.0));

    const std::vector<P> dec = {{0, 3}, {1, 2}, {2, 1}};
    CHECK(monotonicity_score(dec) == doctest::Approx(0.0));

    const std::vector<P> half = {{0, 0}, {1, 2}, {2, 1}};
    CHECK(monotonicity_score(half) == doctest::Approx(0.5));

    // duplicate x merged by averaging
    const std::vector<P> dup = {{0, 0}, {0, 2}, {1, 1}};
    CHECK(monotonicity_score(dup) == doctest::Approx(1.0));

    const std::vector<P> single = {{0, 0}};
    CHECK_THROWS(monotonicity_score(single));
}

TEST_CASE("monotonicity_score is invariant under increasing reparametrization") {
    Rng rng(55);
    std::vector<std::pair<double, double>> pairs(64);
    for (auto& pr : pairs) pr = {rng.normal(), rng.normal()};
    const double base = monotonicity_score(pairs);
    auto warped = pairs;
    for (auto& pr : warped) pr.first = pr.first * pr.first * pr.first;  // x^3
    CHECK(monotonicity_score(warped) == doctest::Approx(base));
}

TEST_CASE("mode_mass") {
    const std::vector<double> above = {1.0, 2.0, 3.0};
    CHECK(mode_mass(above, 0.0, Side::Below) == doctest::Approx(0.0));
    CHECK(mode_mass(above, 0.0, Side::Above) == doctest::Approx(1.0));
    const std::vector<double> split = {-1.0, -1.0, 1.0, 1.0};
    CHECK(mode_mass(split, 0.0, Side::Below) == doctest::Approx(0.5));
    CHECK_THROWS(mode_mass({}, 0.0, Side::Below));
}

TEST_CASE("sample csv dump") {
    const SampleSet s = sample_toy({ToyDataset::MatchSource1D, 16, 2, 1});
    const char* path = "toydata_csv_test.csv";
    write_csv(s, path);
    std::ifstream f(path);
    REQUIRE(f.good());
    std::size_t lines = 0;
    std::string line;
    while (std::getline(f, line)) ++lines;
    CHECK(lines == 16);
    std::remove(path);
}
