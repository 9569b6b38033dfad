#pragma once

#include <string>

#include "uot/measure.hpp"
#include "uot/tape.hpp"

namespace uot {

// Entropy function family for the marginal penalties. Each kind bundles
// psi, its convex conjugate psi_star and the conjugate's derivative.
//
//   Identity  psi*(x) = x; psi is the convex indicator of {1} (the hard
//             marginal constraint).
//   KL        psi(x) = x log x - x + 1,  psi*(x) = e^x - 1
//   Chi2      psi(x) = (x-1)^2,          psi*(x) = x^2/4 + x on x >= -2, else -1
//   Softplus  a direct psi* parametrization, psi*(x) = log(1 + e^x);
//             its psi has no closed form and is recovered numerically.
enum class Entropy { Identity, KL, Chi2, Softplus };

const char* entropy_name(Entropy e);
Entropy entropy_from_name(const std::string& name);

// psi(x); may return +infinity (e.g. x < 0 for KL/Chi2). psi(Softplus, .)
// is a numerical biconjugate on a refined grid, accurate to ~1e-8.
double psi(Entropy e, double x);

double psi_star(Entropy e, double x);
double psi_star_prime(Entropy e, double x);

// psi* composed from tape ops, so losses built with it are differentiable.
Expr psi_star_expr(Entropy e, Expr x);

// D_psi(rho | ref) = sum_i ref_i psi(rho_i / ref_i) over aligned supports.
// Where ref_i = 0 and rho_i > 0 the recession constant lim psi(t)/t is
// charged per unit mass (+infinity for KL/Chi2). Throws on mismatched
// supports.
double csiszar_divergence(Entropy e, const DiscreteMeasure& rho,
                          const DiscreteMeasure& ref);

// Grid maximization of x*y - psi(x) over x in [lo, hi] with n+1 points.
// Oracle for psi_star. Throws if n < 1.
double conjugate_bruteforce(Entropy e, double y, double lo, double hi, long n);

} // namespace uot
