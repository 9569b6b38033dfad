#pragma once

#include <string>
#include <vector>

namespace uot {

// Finitely supported positive measure on the real line: atom locations
// with nonnegative weights. Total mass is the weight sum (not forced to 1;
// callers that need a probability measure normalize or assert).
struct DiscreteMeasure {
    std::vector<double> atoms;
    std::vector<double> weights;

    std::size_t size() const { return atoms.size(); }
    double mass() const;

    // Throws std::invalid_argument if sizes differ, a weight is negative
    // or any entry is non-finite.
    void validate() const;

    static DiscreteMeasure dirac(double atom, double weight = 1.0) {
        return {{atom}, {weight}};
    }
};

std::string to_json(const DiscreteMeasure& m);
DiscreteMeasure measure_from_json(const std::string& text);

} // namespace uot
