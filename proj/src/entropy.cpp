#include "uot/entropy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace uot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double softplus(double x) {
    // max(x,0) + log1p(exp(-|x|)), stable for large |x|
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// psi for Softplus has no closed form; recover it as the biconjugate
// sup_y { x*y - log(1+e^y) } by coarse-to-fine grid maximization. The
// supremum is finite only for x in [0,1].
double softplus_psi(double x) {
    if (x < 0.0 || x > 1.0) return kInf;
    double lo = -40.0, hi = 40.0;
    double best = -kInf, best_y = 0.0;
    const int pts = 2000;
    for (int pass = 0; pass < 4; ++pass) {
        const double step = (hi - lo) / pts;
        for (int i = 0; i <= pts; ++i) {
            const double y = lo + step * i;
            const double v = x * y - softplus(y);
            if (v > best) { best = v; best_y = y; }
        }
        lo = best_y - step;
        hi = best_y + step;
    }
    return best;
}
} // namespace

const char* entropy_name(Entropy e) {
    switch (e) {
    case Entropy::Identity: return "identity";
    case Entropy::KL:       return "kl";
    case Entropy::Chi2:     return "chi2";
    case Entropy::Softplus: return "softplus";
    }
    return "?";
}

Entropy entropy_from_name(const std::string& name) {
    if (name == "identity") return Entropy::Identity;
    if (name == "kl") return Entropy::KL;
    if (name == "chi2") return Entropy::Chi2;
    if (name == "softplus") return Entropy::Softplus;
    throw std::invalid_argument("unknown entropy: " + name);
}

double psi(Entropy e, double x) {
    switch (e) {
    case Entropy::Identity:
        return x == 1.0 ? 0.0 : kInf;
    case Entropy::KL:
        if (x < 0.0) return kInf;
        if (x == 0.0) return 1.0;
        return x * std::log(x) - x + 1.0;
    case Entropy::Chi2:
        return x >= 0.0 ? (x - 1.0) * (x - 1.0) : kInf;
    case Entropy::Softplus:
        return softplus_psi(x);
    }
    return kInf;
}

double psi_star(Entropy e, double x) {
    switch (e) {
    case Entropy::Identity: return x;
    case Entropy::KL:       return std::expm1(x);
    case Entropy::Chi2:     return x >= -2.0 ? 0.25 * x * x + x : -1.0;
    case Entropy::Softplus: return softplus(x);
    }
    return 0.0;
}

double psi_star_prime(Entropy e, double x) {
    switch (e) {
    case Entropy::Identity: return 1.0;
    case Entropy::KL:       return std::exp(x);
    case Entropy::Chi2:     return x >= -2.0 ? 0.5 * x + 1.0 : 0.0;
    case Entropy::Softplus:
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
    }
    return 0.0;
}

Expr psi_star_expr(Entropy e, Expr x) {
    Tape& t = *x.tape;
    switch (e) {
    case Entropy::Identity:
        return x;
    case Entropy::KL:
        return exp(x) - 1.0;
    case Entropy::Chi2:
        // branch on the recorded value; valid a.e. (kink at -2)
        if (x.value() >= -2.0) return 0.25 * pow2(x) + x;
        return lit(t, -1.0);
    case Entropy::Softplus:
        if (x.value() > 0.0) return x + log(1.0 + exp(-x));
        return log(1.0 + exp(x));
    }
    return x;
}

double csiszar_divergence(Entropy e, const DiscreteMeasure& rho,
                          const DiscreteMeasure& ref) {
    rho.validate();
    ref.validate();
    if (rho.size() != ref.size())
        throw std::invalid_argument("csiszar_divergence: support size mismatch");
    for (std::size_t i = 0; i < rho.size(); ++i)
        if (rho.atoms[i] != ref.atoms[i])
            throw std::invalid_argument("csiszar_divergence: supports not aligned");

    double total = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double r = ref.weights[i];
        const double q = rho.weights[i];
        if (r > 0.0) {
            total += r * psi(e, q / r);
        } else if (q > 0.0) {
            // singular part, charged at the recession rate lim psi(t)/t;
            // infinite for every supported entropy, so mass outside the
            // reference support blows the divergence up
            return kInf;
        }
        if (std::isinf(total)) return kInf;
    }
    return total;
}

double conjugate_bruteforce(Entropy e, double y, double lo, double hi, long n) {
    if (n < 1) throw std::invalid_argument("conjugate_bruteforce: empty grid");
    double best = -kInf;
    const double step = (hi - lo) / static_cast<double>(n);
    for (long i = 0; i <= n; ++i) {
        const double x = lo + step * static_cast<double>(i);
        const double p = psi(e, x);
        if (std::isinf(p)) continue;
        best = std::max(best, x * y - p);
    }
    return best;
}

} // namespace uot
