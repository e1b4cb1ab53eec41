#include "kmpa/mpaerl.hpp"

#include <cmath>
#include <string>

#include "kmpa/errors.hpp"

namespace kmpa {

void MpaerlParams::validate() const {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw InvalidConfig("tau must be a finite value >= 0");
    if (!std::isfinite(rho_lo) || !std::isfinite(rho_hi)) throw InvalidConfig("rho bounds must be finite");
    if (!(rho_lo < rho_hi))
        throw InvalidConfig("rho_lo (" + std::to_string(rho_lo) + ") must be below rho_hi (" +
                            std::to_string(rho_hi) + ")");
    solver.validate();
}

AssembledProblem assemble(const MatrixRef& R, const MpaerlParams& params) {
    params.validate();
    if (R.rows() < 1 || R.cols() < 1) throw DimensionMismatch("assemble: return matrix must be nonempty");
    if (!R.allFinite()) throw InvalidConfig("assemble: return matrix has non-finite entries");

    AssembledProblem p;
    p.T = R.rows();
    p.N = R.cols();
    p.tau = params.tau;
    const Index n = p.N;
    const double T = static_cast<double>(p.T);

    p.mu_hat = R.colwise().sum().transpose() / T;
    p.R_tilde.resize(p.T, n + 1);
    p.R_tilde.leftCols(n) = R;
    p.R_tilde.col(n).setConstant(-1.0);

    // A = [mu^T, -1; 1^T, 0], B = [0^T, 1; 0^T, -1]
    Matrix A = Matrix::Zero(2, n + 1);
    A.row(0).head(n) = p.mu_hat.transpose();
    A(0, n) = -1.0;
    A.row(1).head(n).setOnes();
    Matrix B = Matrix::Zero(2, n + 1);
    B(0, n) = 1.0;
    B(1, n) = -1.0;

    p.D.resize(6, n + 1);
    p.D << A, -A, B;
    p.d.resize(6);
    p.d << 0.0, 1.0, 0.0, -1.0, params.rho_lo, -params.rho_hi;

    const double sigma = spectral_norm(p.R_tilde);
    p.lipschitz = (2.0 / T) * sigma * sigma * kSpectralSafetyFactor;
    return p;
}

double objective_f(const VectorRef& v, const AssembledProblem& problem) {
    if (v.size() != problem.N + 1) throw DimensionMismatch("objective_f: expected N+1 entries");
    return (problem.R_tilde * v).squaredNorm() / static_cast<double>(problem.T);
}

Vector gradient_f(const VectorRef& v, const AssembledProblem& problem) {
    if (v.size() != problem.N + 1) throw DimensionMismatch("gradient_f: expected N+1 entries");
    return (2.0 / static_cast<double>(problem.T)) * (problem.R_tilde.transpose() * (problem.R_tilde * v));
}

ProblemSpec AssembledProblem::to_problem_spec() const {
    auto rt = std::make_shared<const Matrix>(R_tilde);
    const double scale = 2.0 / static_cast<double>(T);
    const double inv_t = 1.0 / static_cast<double>(T);
    SmoothTerm f;
    f.gradient = [rt, scale](const Vector& v) -> Vector {
        return scale * (rt->transpose() * (*rt * v));
    };
    f.value = [rt, inv_t](const Vector& v) { return (*rt * v).squaredNorm() * inv_t; };
    f.lipschitz = lipschitz;
    return ProblemSpec{std::move(f), partial_l1_term(tau, N), D, LowerBoundSet(d)};
}

Portfolio solve_window(const MatrixRef& X, const MpaerlParams& params) {
    params.validate();
    if (X.rows() < 1 || X.cols() < 1) throw DimensionMismatch("solve_window: empty window");
    if (!X.allFinite() || !(X.array() > 0.0).all())
        throw InvalidConfig("solve_window: price relatives must be finite and positive");

    const Matrix R = X.array() - 1.0;
    const AssembledProblem assembled = assemble(R, params);
    const Index n = assembled.N;

    // w^T mu ranges over all reals unless every mean is the same
    const double mu_lo = assembled.mu_hat.minCoeff();
    const double mu_hi = assembled.mu_hat.maxCoeff();
    if (mu_hi - mu_lo <= 1e-14 * (1.0 + std::abs(mu_hi)) &&
        (mu_hi < params.rho_lo || mu_lo > params.rho_hi)) {
        throw InfeasibleError("solve_window: all assets share the mean return " + std::to_string(mu_hi) +
                              ", outside [" + std::to_string(params.rho_lo) + ", " +
                              std::to_string(params.rho_hi) + "]");
    }

    const ProblemSpec spec = assembled.to_problem_spec();
    Vector v0 = Vector::Constant(n + 1, 1.0 / static_cast<double>(n));
    v0[n] = 0.5 * (params.rho_lo + params.rho_hi);
    const Vector y0 = assembled.D * v0;

    SolverResult sr = solve(spec, params.solver, v0, y0);

    Portfolio out;
    out.weights = sr.v.head(n);
    out.rho = sr.v[n];
    auto& diag = out.diagnostics;
    diag.iterations = sr.iterations;
    diag.converged = sr.converged;
    diag.final_relative_change = sr.final_relative_change;
    diag.fixed_point_residual = sr.fixed_point_residual;
    diag.objective = sr.objective;
    diag.budget_residual = std::abs(out.weights.sum() - 1.0);
    diag.return_residual = std::abs(out.weights.dot(assembled.mu_hat) - out.rho);
    diag.kkt = kkt_report(sr.v, sr.y, spec);
    return out;
}

}  // namespace kmpa
