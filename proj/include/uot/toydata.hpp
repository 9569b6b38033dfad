#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uot/parallel.hpp"

namespace uot {

// 1D Gaussian-mixture recipes plus a standard normal source.
//   Outlier1D      0.99 N(1, 0.5^2) + 0.01 N(-1, 0.5^2)
//   MatchSource1D  0.50 N(-1, 0.5^2) + 0.50 N(1, 0.5^2)
//   MatchTarget1D  (1/3) N(-1, 0.5^2) + (2/3) N(2, 0.5^2)
//   StdNormal      N(0, I_dim)
enum class ToyDataset { Outlier1D, MatchSource1D, MatchTarget1D, StdNormal };

const char* toy_dataset_name(ToyDataset d);
ToyDataset toy_dataset_from_name(const std::string& name);

struct ToySpec {
    ToyDataset dataset = ToyDataset::StdNormal;
    std::size_t n = 4000;
    std::uint64_t seed = 0;
    int dim = 1;  // used by StdNormal; mixtures are 1D
};

struct SampleSet {
    std::vector<double> points;  // n x d, row-major
    std::size_t n = 0;
    int dim = 1;
    ToySpec provenance;

    std::span<const double> row(std::size_t i) const {
        return {points.data() + i * dim, static_cast<std::size_t>(dim)};
    }
};

SampleSet sample_toy(const ToySpec& spec);

// kNN estimate of KL(p || q) from samples (d/n) sum_i log(s_k/r_k)
// + log(m/(n-1)), with r_k the k-th neighbor distance inside p minus the
// query and s_k the k-th neighbor distance in q. Distances get +1e-12
// before the log to absorb ties. O(n*(n+m)) scan, optionally OpenMP over
// queries; Serial and Parallel results are bitwise identical.
double knn_kl_estimate(std::span<const double> p, std::size_t n,
                       std::span<const double> q, std::size_t m, int dim, int k,
                       ExecPolicy exec = ExecPolicy::Serial);

// Fraction of adjacent pairs (after sorting by x) with non-decreasing T.
// Duplicate x values are merged by averaging their T before scoring.
double monotonicity_score(std::span<const std::pair<double, double>> pairs);

enum class Side { Below, Above };

// Fraction of samples on the given side of the threshold.
double mode_mass(std::span<const double> samples, double threshold, Side side);

// One row per point; plot-ready.
void write_csv(const SampleSet& s, const std::string& path);

} // namespace uot
