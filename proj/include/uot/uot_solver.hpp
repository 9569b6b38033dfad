#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uot/entropy.hpp"
#include "uot/measure.hpp"

namespace uot {

// Dense nonnegative transport plan between two finite supports.
struct Coupling {
    std::size_t rows = 0, cols = 0;
    std::vector<double> pi;  // row-major

    double at(std::size_t i, std::size_t j) const { return pi[i * cols + j]; }
    DiscreteMeasure row_marginal(const DiscreteMeasure& mu) const;
    DiscreteMeasure col_marginal(const DiscreteMeasure& nu) const;
};

struct UotSolution {
    Coupling coupling;
    double objective = 0.0;
    DiscreteMeasure marginal0, marginal1;
    long iterations = 0;
    double kkt_residual = 0.0;
};

// Carries the best iterate when the solver runs out of iterations.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, UotSolution best)
        : std::runtime_error(what), best_iterate(std::move(best)) {}
    UotSolution best_iterate;
};

// Minimizes  sum_ij c_ij pi_ij + D_psi1(pi0|mu) + D_psi2(pi1|nu)  over
// pi >= 0. Exponentiated gradient descent on log pi with Armijo
// backtracking; the objective never increases. Terminates when the KKT
// residual drops below tol. Requires strictly positive weights and smooth
// penalties (KL or Chi2). objective_trace, when given, receives the
// accepted objective value of every iteration.
UotSolution solve_discrete_uot(std::span<const double> cost,
                               const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                               Entropy psi1, Entropy psi2, double tol,
                               long max_iter = 400000,
                               std::vector<double>* objective_trace = nullptr);

// Exact squared 2-Wasserstein distance between 1D measures of equal mass
// via the monotone (sorted) coupling. Throws on unequal mass.
double w2_squared_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

struct BoundReport {
    double lhs = 0.0;    // D_psi1(pi0|mu) + D_psi2(pi1|nu) at the solved coupling
    double rhs = 0.0;    // tau * W2^2(mu, nu)
    double slack = 0.0;  // rhs + budget - lhs
    bool holds = false;
    UotSolution solution;
};

// Solves the penalized problem with cost tau*(x-y)^2 and checks that the
// divergence of the optimal marginals from (mu, nu) stays below
// tau*W2^2(mu,nu), up to a solver budget of 10*tol.
BoundReport verify_theorem_bound(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                 double tau, Entropy psi1, Entropy psi2, double tol);

// min over grid points y of tau*(x-y)^2 - v(y); v given by its values on
// the grid. Reference for checking that a trained generator approximates
// the arginf of the transport map objective.
double c_transform_1d(std::span<const double> grid, std::span<const double> v,
                      double x, double tau);

// JSON round-trip for problem instances and solutions.
struct UotInstance {
    DiscreteMeasure mu, nu;
    double tau = 1.0;
    Entropy psi1 = Entropy::KL, psi2 = Entropy::KL;
};
std::string to_json(const UotInstance& inst);
UotInstance instance_from_json(const std::string& text);
std::string to_json(const UotSolution& sol);

} // namespace uot
