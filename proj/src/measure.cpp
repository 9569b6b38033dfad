#include "uot/measure.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace uot {

double DiscreteMeasure::mass() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

void DiscreteMeasure::validate() const {
    if (atoms.size() != weights.size())
        throw std::invalid_argument("measure: atoms and weights differ in length");
    for (double a : atoms)
        if (!std::isfinite(a)) throw std::invalid_argument("measure: non-finite atom");
    for (double w : weights) {
        if (!std::isfinite(w)) throw std::invalid_argument("measure: non-finite weight");
        if (w < 0.0) throw std::invalid_argument("measure: negative weight");
    }
}

std::string to_json(const DiscreteMeasure& m) {
    nlohmann::json j;
    j["atoms"] = m.atoms;
    j["weights"] = m.weights;
    return j.dump();
}

DiscreteMeasure measure_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    DiscreteMeasure m;
    m.atoms = j.at("atoms").get<std::vector<double>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.validate();
    return m;
}

} // namespace uot
