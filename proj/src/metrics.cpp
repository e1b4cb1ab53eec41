#include "kmpa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "kmpa/errors.hpp"

namespace kmpa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Sample covariance with the n-1 denominator.
double sample_cov(std::span<const double> a, std::span<const double> b) {
    const double ma = mean(a);
    const double mb = mean(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(a.size() - 1);
}

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    return h;
}

// I_x(a, b) with y = 1 - x supplied separately to avoid cancellation.
double incomplete_beta(double a, double b, double x, double y) {
    if (x <= 0.0) return 0.0;
    if (y <= 0.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, y) / b;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidConfig("regularized_incomplete_beta: a, b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw InvalidConfig("regularized_incomplete_beta: x must lie in [0, 1]");
    return incomplete_beta(a, b, x, 1.0 - x);
}

double student_t_upper_tail(double t, double dof) {
    if (!(dof > 0.0)) throw InvalidConfig("student_t_upper_tail: dof must be positive");
    if (std::isnan(t)) return kNaN;
    if (std::isinf(t)) return t > 0.0 ? 0.0 : 1.0;
    const double t2 = t * t;
    const double denom = dof + t2;
    const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, dof / denom, t2 / denom);
    return t >= 0.0 ? tail : 1.0 - tail;
}

double sharpe_ratio(const WealthSeries& series) {
    const std::vector<double> r = series.returns();
    if (r.size() < 2) throw DegenerateSeries("sharpe_ratio: need at least two returns");
    const double sd = std::sqrt(sample_cov(r, r));
    if (!(sd > 0.0)) throw DegenerateSeries("sharpe_ratio: returns have zero variance");
    return mean(r) / sd;
}

AlphaResult alpha_factor(const WealthSeries& strategy, const WealthSeries& market) {
    const std::vector<double> rs = strategy.returns();
    const std::vector<double> rm = market.returns();
    if (rs.size() != rm.size())
        throw DimensionMismatch("alpha_factor: series lengths differ (" + std::to_string(rs.size()) +
                                " vs " + std::to_string(rm.size()) + ")");
    if (rs.size() < 3) throw DegenerateSeries("alpha_factor: need at least three returns");
    const double var_m = sample_cov(rm, rm);
    if (!(var_m > 0.0)) throw DegenerateSeries("alpha_factor: market returns have zero variance");

    const auto n = static_cast<double>(rs.size());
    AlphaResult out;
    out.beta = sample_cov(rs, rm) / var_m;
    const double mean_s = mean(rs);
    const double mean_m = mean(rm);
    out.alpha = mean_s - out.beta * mean_m;

    double sse = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        const double e = rs[i] - out.alpha - out.beta * rm[i];
        sse += e * e;
    }
    const double dof = n - 2.0;
    const double sxx = var_m * (n - 1.0);
    const double se = std::sqrt(sse / dof * (1.0 / n + mean_m * mean_m / sxx));
    if (se > 0.0) {
        out.t_stat = out.alpha / se;
        out.pvalue = student_t_upper_tail(out.t_stat, dof);
    } else {
        const double inf = std::numeric_limits<double>::infinity();
        out.t_stat = out.alpha > 0.0 ? inf : (out.alpha < 0.0 ? -inf : 0.0);
        out.pvalue = out.alpha > 0.0 ? 0.0 : (out.alpha < 0.0 ? 1.0 : 0.5);
    }
    return out;
}

double max_drawdown(const WealthSeries& series) {
    if (series.values.size() < 2) return 0.0;
    double peak = series.values[1];
    double worst = 1.0;  // min S^(l) / peak
    for (std::size_t l = 1; l < series.values.size(); ++l) {
        peak = std::max(peak, series.values[l]);
        worst = std::min(worst, series.values[l] / peak);
    }
    return 1.0 - worst;
}

double tc_adjusted_wealth(const MatrixRef& X, std::span<const Vector> portfolios, double nu) {
    if (!(nu >= 0.0 && nu < 1.0)) throw InvalidConfig("tc_adjusted_wealth: nu must lie in [0, 1)");
    if (static_cast<Index>(portfolios.size()) > X.rows())
        throw DimensionMismatch("tc_adjusted_wealth: more portfolios than periods");
    double wealth = 1.0;
    Vector held = Vector::Zero(X.cols());  // w~^(t-1)
    for (std::size_t t = 0; t < portfolios.size(); ++t) {
        const Vector& w = portfolios[t];
        if (w.size() != X.cols()) throw DimensionMismatch("tc_adjusted_wealth: portfolio size mismatch");
        const auto x = X.row(static_cast<Index>(t)).transpose();
        const double gross = x.dot(w);
        const double turnover = (w - held).lpNorm<1>();
        wealth *= gross * (1.0 - 0.5 * nu * turnover);
        held = w.cwiseProduct(x) / gross;
    }
    return wealth;
}

MetricsReport compute_metrics(const MatrixRef& X, const BacktestResult& strategy,
                              const WealthSeries& market, std::span<const double> tc_rates) {
    MetricsReport m;
    m.final_cw = strategy.wealth.final_wealth();
    try {
        m.sharpe = sharpe_ratio(strategy.wealth);
    } catch (const DegenerateSeries&) {
        m.sharpe = kNaN;
    }
    // a bankrupt strategy is compared with the market over its own lifetime
    WealthSeries mkt = market;
    if (mkt.values.size() > strategy.wealth.values.size()) mkt.values.resize(strategy.wealth.values.size());
    try {
        const AlphaResult a = alpha_factor(strategy.wealth, mkt);
        m.alpha = a.alpha;
        m.beta_capm = a.beta;
        m.alpha_pvalue = a.pvalue;
    } catch (const DegenerateSeries&) {
        m.alpha = m.beta_capm = m.alpha_pvalue = kNaN;
    }
    m.mdd = max_drawdown(strategy.wealth);
    // the bankrupt period's portfolio is recorded but never compounded
    std::span<const Vector> held(strategy.portfolios);
    if (strategy.bankrupt) held = held.first(strategy.wealth.periods());
    for (double nu : tc_rates) m.tc_curve.emplace_back(nu, tc_adjusted_wealth(X, held, nu));
    return m;
}

}  // namespace kmpa
