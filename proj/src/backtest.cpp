#include "kmpa/backtest.hpp"

#include <exception>
#include <string>

#include "kmpa/errors.hpp"

namespace kmpa {

std::vector<double> WealthSeries::returns() const {
    std::vector<double> r;
    if (values.size() < 2) return r;
    r.reserve(values.size() - 1);
    for (std::size_t t = 1; t < values.size(); ++t) r.push_back(values[t] / values[t - 1] - 1.0);
    return r;
}

namespace {

void check_price_relatives(const MatrixRef& X, const char* where) {
    if (X.rows() < 1 || X.cols() < 1) throw DimensionMismatch(std::string(where) + ": empty price matrix");
    if (!X.allFinite() || !(X.array() > 0.0).all())
        throw InvalidConfig(std::string(where) + ": price relatives must be finite and positive");
}

void check_window(const MatrixRef& X, Index window_T, const char* where) {
    check_price_relatives(X, where);
    if (window_T < 1) throw InvalidConfig(std::string(where) + ": window must be >= 1");
    if (X.rows() <= window_T)
        throw InvalidConfig(std::string(where) + ": need more periods (" + std::to_string(X.rows()) +
                            ") than the window length (" + std::to_string(window_T) + ")");
}

Vector equal_weights(Index n) { return Vector::Constant(n, 1.0 / static_cast<double>(n)); }

// Trailing window for 1-based period t: rows t - window_T .. t - 1 (1-based).
Matrix window_for(const MatrixRef& X, Index window_T, Index period) {
    return X.middleRows(period - 1 - window_T, window_T);
}

WindowDecision call_strategy(const WindowStrategy& strategy, const MatrixRef& X, Index window_T,
                             Index period) {
    try {
        WindowDecision d = strategy(window_for(X, window_T, period));
        if (d.weights.size() != X.cols())
            throw DimensionMismatch("strategy returned " + std::to_string(d.weights.size()) +
                                    " weights for " + std::to_string(X.cols()) + " assets");
        if (!d.weights.allFinite()) throw DivergenceError(d.iterations, "strategy returned non-finite weights");
        return d;
    } catch (const StrategyError&) {
        throw;
    } catch (const std::exception& e) {
        throw StrategyError(static_cast<std::size_t>(period),
                            "strategy failed at period " + std::to_string(period) + ": " + e.what());
    }
}

// Compounds one period; returns false on bankruptcy.
bool compound(BacktestResult& out, const MatrixRef& X, Index period, Vector weights) {
    const double gross = X.row(period - 1).dot(weights);
    out.portfolios.push_back(std::move(weights));
    if (!(gross > 0.0)) {
        out.bankrupt = true;
        out.bankrupt_period = static_cast<std::size_t>(period);
        return false;
    }
    out.wealth.values.push_back(out.wealth.values.back() * gross);
    return true;
}

void record(BacktestResult& out, const WindowDecision& d) {
    ++out.strategy_solves;
    if (!d.converged) ++out.nonconverged_solves;
    out.total_iterations += d.iterations;
}

}  // namespace

BacktestResult run_backtest_serial(const MatrixRef& X, Index window_T, const WindowStrategy& strategy) {
    check_window(X, window_T, "run_backtest");
    BacktestResult out;
    const Vector eq = equal_weights(X.cols());
    for (Index t = 1; t <= X.rows(); ++t) {
        Vector w;
        if (t <= window_T) {
            w = eq;
        } else {
            WindowDecision d = call_strategy(strategy, X, window_T, t);
            record(out, d);
            w = std::move(d.weights);
        }
        if (!compound(out, X, t, std::move(w))) break;
    }
    return out;
}

BacktestResult run_backtest(const MatrixRef& X, Index window_T, const WindowStrategy& strategy,
                            Execution execution) {
    if (execution == Execution::Serial) return run_backtest_serial(X, window_T, strategy);
    check_window(X, window_T, "run_backtest");

    const Index solves = X.rows() - window_T;
    std::vector<WindowDecision> decisions(static_cast<std::size_t>(solves));
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(solves));

    // Windows only read X, so every solve is independent.
#pragma omp parallel for schedule(dynamic, 1)
    for (Index j = 0; j < solves; ++j) {
        try {
            decisions[j] = call_strategy(strategy, X, window_T, window_T + 1 + j);
        } catch (...) {
            failures[j] = std::current_exception();
        }
    }

    // Sequential fold; failures past a bankruptcy are never reached, as in
    // the serial path.
    BacktestResult out;
    const Vector eq = equal_weights(X.cols());
    for (Index t = 1; t <= X.rows(); ++t) {
        Vector w;
        if (t <= window_T) {
            w = eq;
        } else {
            const auto j = static_cast<std::size_t>(t - window_T - 1);
            if (failures[j]) std::rethrow_exception(failures[j]);
            record(out, decisions[j]);
            w = std::move(decisions[j].weights);
        }
        if (!compound(out, X, t, std::move(w))) break;
    }
    return out;
}

BacktestResult baseline_1overN(const MatrixRef& X) {
    check_price_relatives(X, "baseline_1overN");
    BacktestResult out;
    const Vector eq = equal_weights(X.cols());
    for (Index t = 1; t <= X.rows(); ++t) compound(out, X, t, eq);
    return out;
}

BacktestResult baseline_market(const MatrixRef& X) {
    check_price_relatives(X, "baseline_market");
    BacktestResult out;
    const Index n = X.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    Vector growth = Vector::Ones(n);  // prod_{s <= t} x_i^(s)
    Vector holding = equal_weights(n);
    for (Index t = 1; t <= X.rows(); ++t) {
        out.portfolios.push_back(holding);
        growth = growth.cwiseProduct(X.row(t - 1).transpose());
        out.wealth.values.push_back(inv_n * growth.sum());
        const Vector drifted = holding.cwiseProduct(X.row(t - 1).transpose());
        holding = drifted / drifted.sum();
    }
    return out;
}

}  // namespace kmpa
