#pragma once

// Markowitz portfolio with an adaptive expected-return level:
//
//     min_{w, rho}  (1/T) ||R w - rho 1_T||^2 + tau ||w||_1
//     s.t.          w^T mu = rho,  w^T 1 = 1,  rho_lo <= rho <= rho_hi
//
// Stacking v = (w; rho) turns it into min f(v) + g(v) s.t. D v >= d with
// f(v) = (1/T) ||[R, -1] v||^2, g the l1 norm of the first N entries, and the
// two equalities written as pairs of opposite inequalities.

#include <memory>

#include "kmpa/kmpa_solver.hpp"

namespace kmpa {

struct MpaerlParams {
    double tau = 1.0;
    double rho_lo = 0.03;
    double rho_hi = 0.1;
    SolverConfig solver;

    void validate() const;
};

struct AssembledProblem {
    Matrix R_tilde;  ///< T x (N+1): [R, -1_T]
    Vector mu_hat;   ///< column means of R
    Matrix D;        ///< 6 x (N+1): (A; -A; B)
    Vector d;        ///< (b; -b; c)
    Index N = 0;
    Index T = 0;
    double lipschitz = 0.0;  ///< (2/T) ||R~^T R~||_2, inflated by kSpectralSafetyFactor
    double tau = 0.0;

    /// Wraps the data into the generic solver interface. The oracles hold a
    /// shared copy of R~, so the spec outlives this object safely.
    ProblemSpec to_problem_spec() const;
};

AssembledProblem assemble(const MatrixRef& R, const MpaerlParams& params);

/// f(v) = (1/T) ||R~ v||^2
double objective_f(const VectorRef& v, const AssembledProblem& problem);

/// (2/T) R~^T (R~ v)
Vector gradient_f(const VectorRef& v, const AssembledProblem& problem);

struct PortfolioDiagnostics {
    long iterations = 0;
    bool converged = false;
    double final_relative_change = 0.0;
    double fixed_point_residual = 0.0;
    double objective = 0.0;
    double budget_residual = 0.0;  ///< |sum(w) - 1|
    double return_residual = 0.0;  ///< |w^T mu - rho|
    KktReport kkt;
};

struct Portfolio {
    Vector weights;
    double rho = 0.0;
    PortfolioDiagnostics diagnostics;
};

/// Solves one window of price relatives X (T x N, entries > 0).
/// Throws InfeasibleError when w^T mu = rho cannot meet [rho_lo, rho_hi], which
/// only happens when every asset has the same sample mean.
Portfolio solve_window(const MatrixRef& X, const MpaerlParams& params);

}  // namespace kmpa
