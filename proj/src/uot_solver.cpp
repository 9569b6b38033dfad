#include "uot/uot_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace uot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double penalty_prime(Entropy e, double t) {
    switch (e) {
    case Entropy::KL:   return std::log(t);
    case Entropy::Chi2: return 2.0 * (t - 1.0);
    default:
        throw std::invalid_argument("solver: penalty must be KL or Chi2");
    }
}

struct Workspace {
    std::vector<double> pi, log_pi, trial_log_pi, trial_pi;
    std::vector<double> row_sum, col_sum, grad;
};

double objective(std::span<const double> cost, const DiscreteMeasure& mu,
                 const DiscreteMeasure& nu, Entropy psi1, Entropy psi2,
                 const std::vector<double>& pi, std::vector<double>& row_sum,
                 std::vector<double>& col_sum) {
    const std::size_t n = mu.size(), m = nu.size();
    row_sum.assign(n, 0.0);
    col_sum.assign(m, 0.0);
    double lin = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double p = pi[i * m + j];
            lin += cost[i * m + j] * p;
            row_sum[i] += p;
            col_sum[j] += p;
        }
    double pen = lin;
    for (std::size_t i = 0; i < n; ++i)
        pen += mu.weights[i] * psi(psi1, row_sum[i] / mu.weights[i]);
    for (std::size_t j = 0; j < m; ++j)
        pen += nu.weights[j] * psi(psi2, col_sum[j] / nu.weights[j]);
    return pen;
}
} // namespace

DiscreteMeasure Coupling::row_marginal(const DiscreteMeasure& mu) const {
    DiscreteMeasure m0;
    m0.atoms = mu.atoms;
    m0.weights.assign(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m0.weights[i] += at(i, j);
    return m0;
}

DiscreteMeasure Coupling::col_marginal(const DiscreteMeasure& nu) const {
    DiscreteMeasure m1;
    m1.atoms = nu.atoms;
    m1.weights.assign(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m1.weights[j] += at(i, j);
    return m1;
}

UotSolution solve_discrete_uot(std::span<const double> cost,
                               const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                               Entropy psi1, Entropy psi2, double tol, long max_iter,
                               std::vector<double>* objective_trace) {
    mu.validate();
    nu.validate();
    if (tol <= 0.0) throw std::invalid_argument("solver: tol must be positive");
    const std::size_t n = mu.size(), m = nu.size();
    if (cost.size() != n * m)
        throw std::invalid_argument("solver: cost matrix shape mismatch");
    for (double w : mu.weights)
        if (w <= 0.0) throw std::invalid_argument("solver: mu weights must be positive");
    for (double w : nu.weights)
        if (w <= 0.0) throw std::invalid_argument("solver: nu weights must be positive");

    Workspace ws;
    ws.pi.resize(n * m);
    ws.log_pi.resize(n * m);
    ws.grad.resize(n * m);
    // product coupling start: both penalty terms vanish for unit masses
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            ws.pi[i * m + j] = mu.weights[i] * nu.weights[j];
            ws.log_pi[i * m + j] = std::log(ws.pi[i * m + j]);
        }

    double fval = objective(cost, mu, nu, psi1, psi2, ws.pi, ws.row_sum, ws.col_sum);
    double step = 1.0;
    double residual = kInf;
    long it = 0;
    if (objective_trace) objective_trace->push_back(fval);

    for (; it < max_iter; ++it) {
        // gradient wrt pi at the current iterate
        residual = 0.0;
        double grad_dot = 0.0;  // sum pi * g^2, directional derivative of the log-space step
        for (std::size_t i = 0; i < n; ++i) {
            const double gr = penalty_prime(psi1, ws.row_sum[i] / mu.weights[i]);
            for (std::size_t j = 0; j < m; ++j) {
                const double gc = penalty_prime(psi2, ws.col_sum[j] / nu.weights[j]);
                const double g = cost[i * m + j] + gr + gc;
                ws.grad[i * m + j] = g;
                const double p = ws.pi[i * m + j];
                residual = std::max(residual, std::abs(p * g));
                if (g < 0.0) residual = std::max(residual, -g);
                grad_dot += p * g * g;
            }
        }
        if (residual < tol) break;

        // backtracking line search on pi <- pi * exp(-step * g)
        step = std::min(step * 2.0, 1e6);
        bool accepted = false;
        ws.trial_log_pi.resize(n * m);
        ws.trial_pi.resize(n * m);
        for (int bt = 0; bt < 80; ++bt) {
            for (std::size_t k = 0; k < n * m; ++k) {
                ws.trial_log_pi[k] = ws.log_pi[k] - step * ws.grad[k];
                ws.trial_pi[k] = std::exp(ws.trial_log_pi[k]);
            }
            std::vector<double> rs, cs;
            const double ftrial =
                objective(cost, mu, nu, psi1, psi2, ws.trial_pi, rs, cs);
            if (std::isfinite(ftrial) && ftrial <= fval - 1e-4 * step * grad_dot) {
                ws.log_pi.swap(ws.trial_log_pi);
                ws.pi.swap(ws.trial_pi);
                ws.row_sum.swap(rs);
                ws.col_sum.swap(cs);
                fval = ftrial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // step underflow: gradient noise floor reached
        if (objective_trace) objective_trace->push_back(fval);
    }

    UotSolution sol;
    sol.coupling = Coupling{n, m, ws.pi};
    sol.objective = fval;
    sol.marginal0 = sol.coupling.row_marginal(mu);
    sol.marginal1 = sol.coupling.col_marginal(nu);
    sol.iterations = it;
    sol.kkt_residual = residual;
    if (residual >= tol)
        throw SolverError("uot solver did not reach tolerance " + std::to_string(tol) +
                              " (residual " + std::to_string(residual) + ")",
                          sol);
    return sol;
}

double w2_squared_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    mu.validate();
    nu.validate();
    if (std::abs(mu.mass() - nu.mass()) > 1e-12)
        throw std::invalid_argument("w2_squared_1d: measures must have equal mass");

    auto sorted = [](const DiscreteMeasure& d) {
        std::vector<std::size_t> idx(d.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return d.atoms[a] < d.atoms[b]; });
        return idx;
    };
    const auto ia = sorted(mu), ib = sorted(nu);

    // monotone coupling: walk both quantile functions in lockstep
    double total = 0.0;
    std::size_t i = 0, j = 0;
    double a_rem = mu.size() ? mu.weights[ia[0]] : 0.0;
    double b_rem = nu.size() ? nu.weights[ib[0]] : 0.0;
    while (i < mu.size() && j < nu.size()) {
        if (a_rem == 0.0) { if (++i >= mu.size()) break; a_rem = mu.weights[ia[i]]; continue; }
        if (b_rem == 0.0) { if (++j >= nu.size()) break; b_rem = nu.weights[ib[j]]; continue; }
        const double f = std::min(a_rem, b_rem);
        const double dx = mu.atoms[ia[i]] - nu.atoms[ib[j]];
        total += f * dx * dx;
        a_rem -= f;
        b_rem -= f;
    }
    return total;
}

BoundReport verify_theorem_bound(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                 double tau, Entropy psi1, Entropy psi2, double tol) {
    if (std::abs(mu.mass() - 1.0) > 1e-9 || std::abs(nu.mass() - 1.0) > 1e-9)
        throw std::invalid_argument("verify_theorem_bound: probability measures required");

    const std::size_t n = mu.size(), m = nu.size();
    std::vector<double> cost(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double d = mu.atoms[i] - nu.atoms[j];
            cost[i * m + j] = tau * d * d;
        }

    BoundReport rep;
    rep.solution = solve_discrete_uot(cost, mu, nu, psi1, psi2, tol);
    rep.lhs = csiszar_divergence(psi1, rep.solution.marginal0, mu) +
              csiszar_divergence(psi2, rep.solution.marginal1, nu);
    rep.rhs = tau * w2_squared_1d(mu, nu);
    const double budget = 10.0 * tol;
    rep.slack = rep.rhs + budget - rep.lhs;
    rep.holds = rep.lhs <= rep.rhs + budget;
    return rep;
}

double c_transform_1d(std::span<const double> grid, std::span<const double> v,
                      double x, double tau) {
    if (grid.empty() || grid.size() != v.size())
        throw std::invalid_argument("c_transform_1d: grid and v must be non-empty and equal length");
    double best = kInf;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double d = x - grid[k];
        best = std::min(best, tau * d * d - v[k]);
    }
    return best;
}

std::string to_json(const UotInstance& inst) {
    nlohmann::json j;
    j["mu"] = {{"atoms", inst.mu.atoms}, {"weights", inst.mu.weights}};
    j["nu"] = {{"atoms", inst.nu.atoms}, {"weights", inst.nu.weights}};
    j["tau"] = inst.tau;
    j["psi1"] = entropy_name(inst.psi1);
    j["psi2"] = entropy_name(inst.psi2);
    return j.dump();
}

UotInstance instance_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    UotInstance inst;
    inst.mu.atoms = j.at("mu").at("atoms").get<std::vector<double>>();
    inst.mu.weights = j.at("mu").at("weights").get<std::vector<double>>();
    inst.nu.atoms = j.at("nu").at("atoms").get<std::vector<double>>();
    inst.nu.weights = j.at("nu").at("weights").get<std::vector<double>>();
    inst.tau = j.at("tau").get<double>();
    inst.psi1 = entropy_from_name(j.at("psi1").get<std::string>());
    inst.psi2 = entropy_from_name(j.at("psi2").get<std::string>());
    inst.mu.validate();
    inst.nu.validate();
    return inst;
}

std::string to_json(const UotSolution& sol) {
    nlohmann::json j;
    j["rows"] = sol.coupling.rows;
    j["cols"] = sol.coupling.cols;
    j["coupling"] = sol.coupling.pi;
    j["objective"] = sol.objective;
    j["marginal0"] = sol.marginal0.weights;
    j["marginal1"] = sol.marginal1.weights;
    j["iterations"] = sol.iterations;
    j["kkt_residual"] = sol.kkt_residual;
    return j.dump();
}

} // namespace uot
