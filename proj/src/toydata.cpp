#include "uot/toydata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <omp.h>

#include "uot/rng.hpp"

namespace uot {

const char* toy_dataset_name(ToyDataset d) {
    switch (d) {
    case ToyDataset::Outlier1D:     return "outlier_1d";
    case ToyDataset::MatchSource1D: return "match_source_1d";
    case ToyDataset::MatchTarget1D: return "match_target_1d";
    case ToyDataset::StdNormal:     return "std_normal";
    }
    return "?";
}

ToyDataset toy_dataset_from_name(const std::string& name) {
    if (name == "outlier_1d") return ToyDataset::Outlier1D;
    if (name == "match_source_1d") return ToyDataset::MatchSource1D;
    if (name == "match_target_1d") return ToyDataset::MatchTarget1D;
    if (name == "std_normal") return ToyDataset::StdNormal;
    throw std::invalid_argument("unknown toy dataset: " + name);
}

SampleSet sample_toy(const ToySpec& spec) {
    if (spec.n < 1) throw std::invalid_argument("sample_toy: n must be >= 1");
    if (spec.dim < 1) throw std::invalid_argument("sample_toy: dim must be >= 1");

    SampleSet s;
    s.provenance = spec;
    Rng rng(Rng::substream(spec.seed, 0x646174ULL + static_cast<int>(spec.dataset)));

    auto mixture = [&](double w0, double m0, double m1, double sigma) {
        s.n = spec.n;
        s.dim = 1;
        s.points.resize(spec.n);
        for (std::size_t i = 0; i < spec.n; ++i) {
            const double mean = rng.uniform() < w0 ? m0 : m1;
            s.points[i] = mean + sigma * rng.normal();
        }
    };

    switch (spec.dataset) {
    case ToyDataset::Outlier1D:     mixture(0.99, 1.0, -1.0, 0.5); break;
    case ToyDataset::MatchSource1D: mixture(0.5, -1.0, 1.0, 0.5); break;
    case ToyDataset::MatchTarget1D: mixture(1.0 / 3.0, -1.0, 2.0, 0.5); break;
    case ToyDataset::StdNormal:
        s.n = spec.n;
        s.dim = spec.dim;
        s.points.resize(spec.n * spec.dim);
        for (double& v : s.points) v = rng.normal();
        break;
    }
    return s;
}

namespace {

double sq_dist(const double* a, const double* b, int dim) {
    double acc = 0.0;
    for (int c = 0; c < dim; ++c) {
        const double d = a[c] - b[c];
        acc += d * d;
    }
    return acc;
}

// k-th smallest of the squared distances from query to all rows of set,
// skipping row `skip` (pass size for none).
double kth_dist(const double* query, std::span<const double> set, std::size_t rows,
                int dim, int k, std::size_t skip, std::vector<double>& scratch) {
    scratch.clear();
    for (std::size_t r = 0; r < rows; ++r) {
        if (r == skip) continue;
        scratch.push_back(sq_dist(query, set.data() + r * dim, dim));
    }
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
    return std::sqrt(scratch[k - 1]);
}

} // namespace

double knn_kl_estimate(std::span<const double> p, std::size_t n,
                       std::span<const double> q, std::size_t m, int dim, int k,
                       ExecPolicy exec) {
    if (k < 1) throw std::invalid_argument("knn_kl_estimate: k must be >= 1");
    if (n <= static_cast<std::size_t>(k) || m <= static_cast<std::size_t>(k))
        throw std::invalid_argument("knn_kl_estimate: need more than k samples per side");
    if (p.size() != n * dim || q.size() != m * dim)
        throw std::invalid_argument("knn_kl_estimate: sample buffer shape mismatch");

    std::vector<double> per_query(n);
    const bool par = exec == ExecPolicy::Parallel;

#pragma omp parallel if (par)
    {
        std::vector<double> scratch;
#pragma omp for schedule(static)
        for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const double* x = p.data() + i * dim;
            const double rk = kth_dist(x, p, n, dim, k, i, scratch);
            const double sk = kth_dist(x, q, m, dim, k, static_cast<std::size_t>(-1), scratch);
            per_query[i] = std::log((sk + 1e-12) / (rk + 1e-12));
        }
    }

    // fixed-order reduction so thread count cannot change the result
    double acc = 0.0;
    for (double v : per_query) acc += v;
    if (!std::isfinite(acc))
        throw std::runtime_error("knn_kl_estimate: degenerate samples (non-finite statistic)");
    return (static_cast<double>(dim) / static_cast<double>(n)) * acc +
           std::log(static_cast<double>(m) / static_cast<double>(n - 1));
}

double monotonicity_score(std::span<const std::pair<double, double>> pairs) {
    if (pairs.size() < 2)
        throw std::invalid_argument("monotonicity_score: need at least two pairs");
    std::vector<std::pair<double, double>> sorted(pairs.begin(), pairs.end());
    std::sort(sorted.begin(), sorted.end());

    // merge duplicate x by averaging T
    std::vector<std::pair<double, double>> merged;
    merged.reserve(sorted.size());
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < sorted.size() && sorted[j].first == sorted[i].first)
            sum += sorted[j++].second;
        merged.emplace_back(sorted[i].first, sum / static_cast<double>(j - i));
        i = j;
    }
    if (merged.size() < 2)
        throw std::invalid_argument("monotonicity_score: need at least two distinct x");

    std::size_t up = 0;
    for (std::size_t a = 0; a + 1 < merged.size(); ++a)
        if (merged[a + 1].second >= merged[a].second) ++up;
    return static_cast<double>(up) / static_cast<double>(merged.size() - 1);
}

double mode_mass(std::span<const double> samples, double threshold, Side side) {
    if (samples.empty()) throw std::invalid_argument("mode_mass: empty sample set");
    std::size_t hit = 0;
    for (double v : samples)
        hit += side == Side::Below ? (v < threshold) : (v > threshold);
    return static_cast<double>(hit) / static_cast<double>(samples.size());
}

void write_csv(const SampleSet& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.precision(17);
    for (std::size_t i = 0; i < s.n; ++i) {
        for (int c = 0; c < s.dim; ++c) {
            if (c) f << ',';
            f << s.points[i * s.dim + c];
        }
        f << '\n';
    }
}

} // namespace uot
