#pragma once

// Krasnoselskii-Mann proximity algorithm for
//
//     minimize f(x) + g(x)   subject to   Q x >= q
//
// with f convex and L-smooth and g convex with an inexpensive prox. The
// primal-dual pair z = (v, y) is driven to a fixed point of the operator
//
//     v~ = prox_{beta g}(v - beta (grad f(v) + Q^T y))
//     y~ = prox_{eta i_q^*}(y + eta Q (2 v~ - v))
//
// which is averaged nonexpansive in the metric
//
//     W = [ I/beta   -Q^T  ]
//         [ -Q       I/eta ]
//
// whenever lambda_min(W) > L / 2. Momentum is applied as
// z <- (1 + theta_k) T(z) - theta_k z with theta_k = varrho k / (k + delta).
//
// Dual sign convention: y lives in the normal cone of {x >= q} at Qv, so
// multipliers of active rows are nonpositive and inactive rows carry y = 0.

#include <functional>
#include <optional>

#include "kmpa/prox_ops.hpp"

namespace kmpa {

/// The smooth term f.
struct SmoothTerm {
    std::function<Vector(const Vector&)> gradient;
    std::function<double(const Vector&)> value;
    double lipschitz = 0.0;  ///< L with ||grad f(a) - grad f(b)|| <= L ||a - b||
};

/// The prox-friendly term g.
struct ProxTerm {
    /// prox_{scale * g}(x)
    std::function<Vector(const Vector&, double scale)> prox;
    std::function<double(const Vector&)> value;
    /// dist(u, subdifferential of g at v); used only for KKT diagnostics.
    std::function<double(const Vector& v, const Vector& u)> subgradient_distance;
};

/// g(x) = tau * sum_{i < active_len} |x_i|.
ProxTerm partial_l1_term(double tau, Index active_len);

/// g = 0.
ProxTerm zero_term();

/// Model min f + g s.t. Qx >= q. Immutable once built; share freely across threads.
struct ProblemSpec {
    SmoothTerm f;
    ProxTerm g;
    Matrix Q;
    LowerBoundSet q;

    Index primal_dim() const noexcept { return Q.cols(); }
    Index dual_dim() const noexcept { return Q.rows(); }
    void validate() const;
    double objective(const Vector& v) const { return f.value(v) + g.value(v); }
};

struct SolverConfig {
    double varrho = 0.8;
    double delta = 3.0;
    double tol = 1e-8;
    long max_iter = 10000;
    /// When the relative-change rule fires, also require
    /// fixed_point_residual <= 10 tol (1 + ||v||_inf) before stopping. The bare
    /// rule can fire while v sits on a kink of g and y is still moving.
    /// false gives the plain relative-change rule.
    bool confirm_residual = true;
    std::optional<double> beta;  ///< auto-selected when empty
    std::optional<double> eta;   ///< auto-selected when empty

    void validate() const;
};

struct StepSizes {
    double beta = 0.0;
    double eta = 0.0;
    double xi = 0.0;
};

/// xi = 1 - max(varrho, 0), beta = xi / L and
/// eta = xi (2 xi - beta L) / (4 beta xi^2 ||Q||^2 + L (2 xi - beta L)),
/// i.e. half of the largest eta that keeps lambda_min(W) > L / (2 xi).
StepSizes select_step_sizes(double L, double norm_Q, double varrho);

/// Throws InvalidConfig unless beta in (0, 2 xi / L) and eta is strictly inside
/// (0, 2 xi (2 xi - beta L) / (4 beta xi^2 ||Q||^2 + L (2 xi - beta L))).
void validate_step_sizes(double beta, double eta, double L, double norm_Q, double varrho);

/// Upper end of the admissible eta interval for a given beta.
double eta_upper_bound(double beta, double L, double norm_Q, double xi);

/// theta_k = varrho k / (k + delta).
double momentum_weight(long k, double varrho, double delta) noexcept;

struct SolverState {
    Vector v;
    Vector y;
    long k = 0;
    double theta = 0.0;  ///< theta used by the most recent step
};

struct StepParams {
    double beta = 0.0;
    double eta = 0.0;
    double varrho = 0.0;
    double delta = 1.0;
};

struct PrimalDual {
    Vector v;
    Vector y;
};

/// One application of the momentum-free operator T_W.
PrimalDual tw_step(const VectorRef& v, const VectorRef& y, const ProblemSpec& problem, double beta,
                   double eta);

/// One KMPA iteration: T_W followed by the momentum extrapolation.
/// Throws DivergenceError if the new iterate is not finite.
SolverState kmpa_step(const SolverState& state, const ProblemSpec& problem, const StepParams& params);

struct SolverResult {
    Vector v;
    Vector y;
    long iterations = 0;
    bool converged = false;
    double final_relative_change = 0.0;
    double fixed_point_residual = 0.0;
    double objective = 0.0;
    StepSizes steps;
};

/// Called after every iteration with the new state and its relative change.
using IterationObserver = std::function<void(const SolverState&, double relative_change)>;

/// Iterates kmpa_step from (v0, y0) until ||v^k - v^{k-1}|| / ||v^{k-1}|| <= tol
/// (confirmed by the residual test unless disabled) or k > max_iter, so at
/// most max_iter + 1 steps are taken.
SolverResult solve(const ProblemSpec& problem, const SolverConfig& config, const VectorRef& v0,
                   const VectorRef& y0, const IterationObserver& observer = {});

/// max(||v - prox_g(v - beta (grad f(v) + Q^T y), beta)||_inf,
///     ||y - prox_{eta i_q^*}(y + eta Q v)||_inf); zero exactly at fixed points.
double fixed_point_residual(const VectorRef& v, const VectorRef& y, const ProblemSpec& problem,
                            double beta, double eta);

/// 10 tol (1 + ||v||_inf), the residual accepted at convergence.
double residual_threshold(const VectorRef& v, double tol);

struct KktReport {
    double primal_infeasibility = 0.0;  ///< max(0, max_i (q - Qv)_i)
    double complementarity = 0.0;       ///< max_i |y_i (Qv - q)_i|
    double dual_sign_violation = 0.0;   ///< max_i max(0, y_i)
    double stationarity = 0.0;          ///< dist(-grad f(v) - Q^T y, dg(v))

    double max_violation() const;
};

KktReport kkt_report(const VectorRef& v, const VectorRef& y, const ProblemSpec& problem);

}  // namespace kmpa
