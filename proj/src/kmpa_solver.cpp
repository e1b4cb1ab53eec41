#include "kmpa/kmpa_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kmpa/errors.hpp"

namespace kmpa {

namespace {

// Below this, the relative stopping rule falls back to the absolute change.
constexpr double kTinyNorm = 1e-300;

void check_dims(const VectorRef& v, const VectorRef& y, const ProblemSpec& problem, const char* where) {
    if (v.size() != problem.primal_dim() || y.size() != problem.dual_dim())
        throw DimensionMismatch(std::string(where) + ": expected (v, y) of sizes (" +
                                std::to_string(problem.primal_dim()) + ", " +
                                std::to_string(problem.dual_dim()) + "), got (" +
                                std::to_string(v.size()) + ", " + std::to_string(y.size()) + ")");
}

double xi_of(double varrho) { return 1.0 - std::max(varrho, 0.0); }

}  // namespace

ProxTerm partial_l1_term(double tau, Index active_len) {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw InvalidConfig("partial_l1_term: tau must be >= 0");
    if (active_len < 0) throw InvalidConfig("partial_l1_term: active_len must be >= 0");
    ProxTerm term;
    term.prox = [tau, active_len](const Vector& x, double scale) {
        return prox_partial_l1(x, ScaledL1Spec{scale * tau, active_len});
    };
    term.value = [tau, active_len](const Vector& x) {
        if (active_len > x.size()) throw DimensionMismatch("partial_l1_term: vector too short");
        return tau * x.head(active_len).lpNorm<1>();
    };
    term.subgradient_distance = [tau, active_len](const Vector& v, const Vector& u) {
        if (v.size() != u.size() || active_len > v.size())
            throw DimensionMismatch("partial_l1_term: size mismatch");
        // iterates carry rounding noise, so near-zero entries count as zero
        const double zero_tol = 1e-10 * (1.0 + v.lpNorm<Eigen::Infinity>());
        double dist = 0.0;
        for (Index i = 0; i < v.size(); ++i) {
            double d;
            if (i >= active_len) {
                d = std::abs(u[i]);
            } else if (std::abs(v[i]) <= zero_tol) {
                d = std::max(std::abs(u[i]) - tau, 0.0);
            } else {
                d = std::abs(u[i] - (v[i] > 0.0 ? tau : -tau));
            }
            dist = std::max(dist, d);
        }
        return dist;
    };
    return term;
}

ProxTerm zero_term() {
    ProxTerm term;
    term.prox = [](const Vector& x, double) { return x; };
    term.value = [](const Vector&) { return 0.0; };
    term.subgradient_distance = [](const Vector&, const Vector& u) {
        return u.size() == 0 ? 0.0 : u.lpNorm<Eigen::Infinity>();
    };
    return term;
}

void ProblemSpec::validate() const {
    if (!f.gradient || !f.value) throw InvalidConfig("ProblemSpec: f needs gradient and value oracles");
    if (!g.prox || !g.value) throw InvalidConfig("ProblemSpec: g needs prox and value oracles");
    if (!(f.lipschitz > 0.0) || !std::isfinite(f.lipschitz))
        throw InvalidConfig("ProblemSpec: Lipschitz constant must be positive and finite");
    if (Q.rows() != q.size())
        throw DimensionMismatch("ProblemSpec: Q has " + std::to_string(Q.rows()) + " rows but q has " +
                                std::to_string(q.size()) + " entries");
    if (Q.cols() < 1) throw DimensionMismatch("ProblemSpec: Q must have at least one column");
    if (!Q.allFinite()) throw InvalidConfig("ProblemSpec: Q must be finite");
}

void SolverConfig::validate() const {
    if (!(std::abs(varrho) < 1.0)) throw InvalidConfig("SolverConfig: |varrho| must be < 1");
    if (!(delta > 0.0)) throw InvalidConfig("SolverConfig: delta must be positive");
    if (!(tol > 0.0)) throw InvalidConfig("SolverConfig: tol must be positive");
    if (max_iter < 1) throw InvalidConfig("SolverConfig: max_iter must be >= 1");
    if (beta && !(*beta > 0.0)) throw InvalidConfig("SolverConfig: beta must be positive");
    if (eta && !(*eta > 0.0)) throw InvalidConfig("SolverConfig: eta must be positive");
}

double eta_upper_bound(double beta, double L, double norm_Q, double xi) {
    const double slack = 2.0 * xi - beta * L;
    return 2.0 * xi * slack / (4.0 * beta * xi * xi * norm_Q * norm_Q + L * slack);
}

StepSizes select_step_sizes(double L, double norm_Q, double varrho) {
    if (!(L > 0.0) || !std::isfinite(L)) throw InvalidConfig("select_step_sizes: L must be positive");
    if (!(std::abs(varrho) < 1.0)) throw InvalidConfig("select_step_sizes: |varrho| must be < 1");
    if (!(norm_Q >= 0.0)) throw InvalidConfig("select_step_sizes: norm_Q must be nonnegative");
    StepSizes s;
    s.xi = xi_of(varrho);
    s.beta = s.xi / L;
    const double slack = 2.0 * s.xi - s.beta * L;
    s.eta = s.xi * slack / (4.0 * s.beta * s.xi * s.xi * norm_Q * norm_Q + L * slack);
    return s;
}

void validate_step_sizes(double beta, double eta, double L, double norm_Q, double varrho) {
    const double xi = xi_of(varrho);
    if (!(beta > 0.0 && beta < 2.0 * xi / L))
        throw InvalidConfig("beta = " + std::to_string(beta) + " outside (0, 2 xi / L) = (0, " +
                            std::to_string(2.0 * xi / L) + ")");
    const double upper = eta_upper_bound(beta, L, norm_Q, xi);
    if (!(eta > 0.0 && eta < upper))
        throw InvalidConfig("eta = " + std::to_string(eta) + " outside (0, " + std::to_string(upper) + ")");
}

double momentum_weight(long k, double varrho, double delta) noexcept {
    const double kd = static_cast<double>(k);
    return varrho * kd / (kd + delta);
}

PrimalDual tw_step(const VectorRef& v, const VectorRef& y, const ProblemSpec& problem, double beta,
                   double eta) {
    check_dims(v, y, problem, "tw_step");
    const Vector vk = v;
    Vector forward = vk - beta * (problem.f.gradient(vk) + problem.Q.transpose() * y);
    PrimalDual out;
    out.v = problem.g.prox(forward, beta);
    if (out.v.size() != vk.size()) throw DimensionMismatch("tw_step: prox_g returned wrong size");
    const Vector dual_arg = y + eta * (problem.Q * (2.0 * out.v - vk));
    out.y = prox_conjugate_indicator(dual_arg, problem.q, eta);
    return out;
}

SolverState kmpa_step(const SolverState& state, const ProblemSpec& problem, const StepParams& params) {
    PrimalDual t = tw_step(state.v, state.y, problem, params.beta, params.eta);
    SolverState next;
    next.theta = momentum_weight(state.k, params.varrho, params.delta);
    next.v = (1.0 + next.theta) * t.v - next.theta * state.v;
    next.y = (1.0 + next.theta) * t.y - next.theta * state.y;
    next.k = state.k + 1;
    if (!next.v.allFinite() || !next.y.allFinite())
        throw DivergenceError(next.k, "KMPA iterate became non-finite at iteration " +
                                          std::to_string(next.k) +
                                          " (check the Lipschitz constant and the oracles)");
    return next;
}

SolverResult solve(const ProblemSpec& problem, const SolverConfig& config, const VectorRef& v0,
                   const VectorRef& y0, const IterationObserver& observer) {
    problem.validate();
    config.validate();
    check_dims(v0, y0, problem, "solve");

    const double L = problem.f.lipschitz;
    const double norm_Q = spectral_norm(problem.Q) * kSpectralSafetyFactor;
    StepSizes steps = select_step_sizes(L, norm_Q, config.varrho);
    if (config.beta) {
        steps.beta = *config.beta;
        if (!config.eta && steps.beta < 2.0 * steps.xi / L)
            steps.eta = 0.5 * eta_upper_bound(steps.beta, L, norm_Q, steps.xi);
    }
    if (config.eta) steps.eta = *config.eta;
    if (config.beta || config.eta) validate_step_sizes(steps.beta, steps.eta, L, norm_Q, config.varrho);

    const StepParams params{steps.beta, steps.eta, config.varrho, config.delta};
    SolverState state{v0, y0, 0, 0.0};
    double rel_change = std::numeric_limits<double>::infinity();
    bool converged = false;
    do {
        SolverState next = kmpa_step(state, problem, params);
        const double prev_norm = state.v.norm();
        const double change = (next.v - state.v).norm();
        rel_change = prev_norm < kTinyNorm ? change : change / prev_norm;
        state = std::move(next);
        if (observer) observer(state, rel_change);
        converged = rel_change <= config.tol;
        if (converged && config.confirm_residual)
            converged = fixed_point_residual(state.v, state.y, problem, steps.beta, steps.eta) <=
                        residual_threshold(state.v, config.tol);
    } while (!converged && state.k <= config.max_iter);

    SolverResult result;
    result.iterations = state.k;
    result.converged = converged;
    result.final_relative_change = rel_change;
    result.fixed_point_residual = fixed_point_residual(state.v, state.y, problem, steps.beta, steps.eta);
    result.objective = problem.objective(state.v);
    result.steps = steps;
    result.v = std::move(state.v);
    result.y = std::move(state.y);
    return result;
}

double fixed_point_residual(const VectorRef& v, const VectorRef& y, const ProblemSpec& problem,
                            double beta, double eta) {
    check_dims(v, y, problem, "fixed_point_residual");
    const Vector vk = v;
    const Vector primal =
        problem.g.prox(vk - beta * (problem.f.gradient(vk) + problem.Q.transpose() * y), beta);
    const Vector dual = prox_conjugate_indicator(y + eta * (problem.Q * vk), problem.q, eta);
    const double rp = (vk - primal).lpNorm<Eigen::Infinity>();
    const double rd = y.size() == 0 ? 0.0 : (y - dual).lpNorm<Eigen::Infinity>();
    return std::max(rp, rd);
}

double residual_threshold(const VectorRef& v, double tol) {
    return 10.0 * tol * (1.0 + (v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>()));
}

double KktReport::max_violation() const {
    return std::max({primal_infeasibility, complementarity, dual_sign_violation, stationarity});
}

KktReport kkt_report(const VectorRef& v, const VectorRef& y, const ProblemSpec& problem) {
    check_dims(v, y, problem, "kkt_report");
    const Vector vk = v;
    const Vector slack = problem.Q * vk - problem.q.bounds();
    KktReport r;
    r.primal_infeasibility = std::max(0.0, (-slack).maxCoeff());
    r.complementarity = y.cwiseProduct(slack).lpNorm<Eigen::Infinity>();
    r.dual_sign_violation = std::max(0.0, y.maxCoeff());
    const Vector u = -problem.f.gradient(vk) - problem.Q.transpose() * y;
    if (problem.g.subgradient_distance) {
        r.stationarity = problem.g.subgradient_distance(vk, u);
    } else {
        r.stationarity = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

}  // namespace kmpa
