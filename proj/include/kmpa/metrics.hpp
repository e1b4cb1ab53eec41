#pragma once

#include <span>
#include <utility>
#include <vector>

#include "kmpa/backtest.hpp"

namespace kmpa {

/// Monthly Sharpe ratio with zero risk-free rate: mean(r) / sd(r), sd with n-1.
/// Throws DegenerateSeries on fewer than two returns or zero variance.
double sharpe_ratio(const WealthSeries& series);

struct AlphaResult {
    double alpha = 0.0;
    double beta = 0.0;
    double t_stat = 0.0;
    double pvalue = 0.0;  ///< right tail, H0: alpha <= 0
};

/// CAPM regression r_s = alpha + beta r_m + e and the intercept t-test with
/// n - 2 degrees of freedom. Zero residual variance maps to pvalue 0 / 0.5 / 1
/// for alpha > 0 / = 0 / < 0.
AlphaResult alpha_factor(const WealthSeries& strategy, const WealthSeries& market);

/// 1 - min_l S^(l) / max_{1 <= t <= l} S^(t) over l = 1..T; 0 when T = 0.
double max_drawdown(const WealthSeries& series);

/// Final wealth under proportional costs at rate nu in [0, 1):
/// prod_t (x_t . w_t) (1 - nu/2 sum_i |w_t,i - w~_{t-1,i}|) with drifted
/// holdings w~ and w~_0 = 0.
double tc_adjusted_wealth(const MatrixRef& X, std::span<const Vector> portfolios, double nu);

/// Regularized incomplete beta function I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);

/// P(T > t) for Student's t with `dof` degrees of freedom.
double student_t_upper_tail(double t, double dof);

struct MetricsReport {
    double final_cw = 0.0;
    double sharpe = 0.0;
    double alpha = 0.0;
    double beta_capm = 0.0;
    double alpha_pvalue = 0.0;
    double mdd = 0.0;
    std::vector<std::pair<double, double>> tc_curve;  ///< (nu, final CW)
};

/// Every metric at once. Statistics that are undefined for the series
/// (e.g. zero variance) are reported as NaN instead of throwing.
MetricsReport compute_metrics(const MatrixRef& X, const BacktestResult& strategy,
                              const WealthSeries& market, std::span<const double> tc_rates);

}  // namespace kmpa
