#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "kmpa/prox_ops.hpp"

namespace kmpa {

/// Cumulative wealth S^(0..T) with S^(0) = 1.
struct WealthSeries {
    std::vector<double> values{1.0};

    std::size_t periods() const noexcept { return values.empty() ? 0 : values.size() - 1; }
    double final_wealth() const { return values.back(); }
    /// r^(t) = S^(t) / S^(t-1) - 1 for t = 1..T
    std::vector<double> returns() const;
};

/// What a strategy decides for one trading period.
struct WindowDecision {
    Vector weights;
    bool converged = true;
    long iterations = 0;
};

/// Maps a trailing window of price relatives (window_T x N) to a portfolio.
/// Must be reentrant: the parallel backtest calls it from several threads.
using WindowStrategy = std::function<WindowDecision(const Matrix& window)>;

struct BacktestResult {
    WealthSeries wealth;
    /// Portfolio held during period t is portfolios[t - 1].
    std::vector<Vector> portfolios;
    bool bankrupt = false;
    std::optional<std::size_t> bankrupt_period;  ///< 1-based
    std::size_t strategy_solves = 0;
    std::size_t nonconverged_solves = 0;
    long total_iterations = 0;
};

enum class Execution { Serial, Parallel };

/// Moving-window backtest. Periods t <= window_T hold the equal-weight
/// portfolio; each later period t holds strategy(X rows t-window_T .. t-1).
/// A nonpositive portfolio return ends the series and flags bankruptcy.
/// Strategy failures are rethrown as StrategyError carrying the period.
BacktestResult run_backtest(const MatrixRef& X, Index window_T, const WindowStrategy& strategy,
                            Execution execution = Execution::Parallel);

/// Straight-line reference used to validate the parallel path: solve then
/// compound, one period at a time.
BacktestResult run_backtest_serial(const MatrixRef& X, Index window_T, const WindowStrategy& strategy);

/// Rebalance to 1/N every period.
BacktestResult baseline_1overN(const MatrixRef& X);

/// Buy and hold the initial equal-weight portfolio. Recorded portfolios are
/// the drifted holdings, so transaction costs accrue only in period 1.
BacktestResult baseline_market(const MatrixRef& X);

}  // namespace kmpa
