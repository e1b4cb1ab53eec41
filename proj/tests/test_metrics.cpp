#include <cmath>
#include <limits>
#include <random>

#include <boost/math/distributions/students_t.hpp>
#include <Eigen/Dense>
#include <doctest.h>

#include "kmpa/errors.hpp"
#include "kmpa/metrics.hpp"
#include "support/oracles.hpp"

using namespace kmpa;
using namespace kmpa::testing;

namespace {

WealthSeries from_returns(const std::vector<double>& r) {
    WealthSeries s;
    for (double x : r) s.values.push_back(s.values.back() * (1.0 + x));
    return s;
}

std::vector<double> random_returns(Rng& rng, std::size_t n, double mean = 0.01, double sd = 0.05) {
    std::normal_distribution<double> normal(mean, sd);
    std::vector<double> r(n);
    for (auto& x : r) x = normal(rng);
    return r;
}

double brute_force_mdd(const WealthSeries& s) {
    double worst = 0.0;
    for (std::size_t l = 1; l < s.values.size(); ++l)
        for (std::size_t t = 1; t <= l; ++t) worst = std::max(worst, 1.0 - s.values[l] / s.values[t]);
    return worst;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("sharpe_ratio") {
    CHECK_THROWS_AS(sharpe_ratio(from_returns({0.02, 0.02, 0.02})), DegenerateSeries);
    CHECK_THROWS_AS(sharpe_ratio(from_returns({0.02})), DegenerateSeries);
    CHECK(sharpe_ratio(from_returns({0.1, -0.1})) == doctest::Approx(0.0).epsilon(1e-12));

    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const WealthSeries s = from_returns(random_returns(rng, 30));
        const auto r = s.returns();
        double m = 0.0;
        for (double x : r) m += x;
        m /= static_cast<double>(r.size());
        double ss = 0.0;
        for (double x : r) ss += (x - m) * (x - m);
        const double sd = std::sqrt(ss / static_cast<double>(r.size() - 1));
        CHECK(sharpe_ratio(s) == doctest::Approx(m / sd).epsilon(1e-12));
    }
}

TEST_CASE("alpha_factor special cases") {
    Rng rng(2);
    const WealthSeries m = from_returns(random_returns(rng, 25));
    const AlphaResult same = alpha_factor(m, m);
    CHECK(std::abs(same.alpha) <= 1e-15);
    CHECK(same.beta == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(same.pvalue == doctest::Approx(0.5).epsilon(1e-12));

    auto r = m.returns();
    for (auto& x : r) x += 0.01;
    const AlphaResult shifted = alpha_factor(from_returns(r), m);
    CHECK(shifted.beta == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(shifted.alpha == doctest::Approx(0.01).epsilon(1e-10));
    CHECK(shifted.pvalue <= 1e-12);

    CHECK_THROWS_AS(alpha_factor(m, from_returns(random_returns(rng, 10))), DimensionMismatch);
    CHECK_THROWS_AS(alpha_factor(from_returns({0.1, 0.2}), from_returns({0.1, 0.3})), DegenerateSeries);
    CHECK_THROWS_AS(alpha_factor(from_returns({0.1, 0.2, 0.0}), from_returns({0.01, 0.01, 0.01})),
                    DegenerateSeries);
}

TEST_CASE("alpha_factor against normal equations and Boost's t distribution") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto rm = random_returns(rng, 40);
        auto rs = random_returns(rng, 40, 0.002, 0.02);
        for (std::size_t t = 0; t < rs.size(); ++t) rs[t] += 0.8 * rm[t];
        const AlphaResult a = alpha_factor(from_returns(rs), from_returns(rm));

        // recompute returns exactly as the library sees them
        const auto s_ret = from_returns(rs).returns();
        const auto m_ret = from_returns(rm).returns();
        const Index n = static_cast<Index>(s_ret.size());
        Matrix Xd(n, 2);
        Vector yv(n);
        for (Index t = 0; t < n; ++t) {
            Xd(t, 0) = 1.0;
            Xd(t, 1) = m_ret[static_cast<std::size_t>(t)];
            yv[t] = s_ret[static_cast<std::size_t>(t)];
        }
        const Matrix XtX = Xd.transpose() * Xd;
        const Vector coef = XtX.ldlt().solve(Xd.transpose() * yv);
        CHECK(std::abs(a.alpha - coef[0]) <= 1e-10);
        CHECK(std::abs(a.beta - coef[1]) <= 1e-10);

        const Vector e = yv - Xd * coef;
        const double s2 = e.squaredNorm() / static_cast<double>(n - 2);
        const double se = std::sqrt(s2 * XtX.inverse()(0, 0));
        const double t_stat = coef[0] / se;
        boost::math::students_t dist(static_cast<double>(n - 2));
        const double p = boost::math::cdf(boost::math::complement(dist, t_stat));
        CHECK(std::abs(a.pvalue - p) <= 1e-8);
        CHECK(a.t_stat == doctest::Approx(t_stat).epsilon(1e-8));

        // residuals satisfy the normal equations
        double sum_e = 0.0, sum_me = 0.0;
        for (Index t = 0; t < n; ++t) {
            const double et = yv[t] - a.alpha - a.beta * Xd(t, 1);
            sum_e += et;
            sum_me += Xd(t, 1) * et;
        }
        CHECK(std::abs(sum_e) <= 1e-9);
        CHECK(std::abs(sum_me) <= 1e-9);
    }
}

TEST_CASE("t tail and incomplete beta against Boost") {
    Rng rng(4);
    std::uniform_real_distribution<double> tdist(-8.0, 8.0);
    std::uniform_real_distribution<double> dof(1.0, 300.0);
    for (int i = 0; i < 2000; ++i) {
        const double t = tdist(rng), v = dof(rng);
        boost::math::students_t d(v);
        CHECK(std::abs(student_t_upper_tail(t, v) - boost::math::cdf(boost::math::complement(d, t))) <= 1e-12);
    }
    CHECK(student_t_upper_tail(0.0, 5.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(student_t_upper_tail(std::numeric_limits<double>::infinity(), 5.0) == 0.0);
    CHECK(std::isnan(student_t_upper_tail(std::nan(""), 5.0)));
    CHECK_THROWS_AS(student_t_upper_tail(1.0, 0.0), InvalidConfig);

    CHECK(regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0);
    // I_x(1, 1) = x, I_x(a, 1) = x^a
    CHECK(regularized_incomplete_beta(1.0, 1.0, 0.3) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(regularized_incomplete_beta(2.5, 1.0, 0.4) == doctest::Approx(std::pow(0.4, 2.5)).epsilon(1e-13));
    CHECK_THROWS_AS(regularized_incomplete_beta(0.0, 1.0, 0.5), InvalidConfig);
    CHECK_THROWS_AS(regularized_incomplete_beta(1.0, 1.0, 1.5), InvalidConfig);
}

TEST_CASE("zero standard error maps to a boundary p-value") {
    const WealthSeries m = from_returns({0.01, 0.03, -0.02, 0.05});
    auto down = m.returns();
    for (auto& x : down) x -= 0.01;
    const AlphaResult a = alpha_factor(from_returns(down), m);
    CHECK(a.alpha < 0.0);
    CHECK(a.pvalue == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("max_drawdown") {
    WealthSeries s;
    s.values = {1.0, 2.0, 1.0, 3.0, 1.5};
    CHECK(max_drawdown(s) == 0.5);
    s.values = {1.0, 1.1, 1.2, 1.5};
    CHECK(max_drawdown(s) == 0.0);
    CHECK(max_drawdown(WealthSeries{}) == 0.0);
    // S^(0) is not a peak
    s.values = {1.0, 0.5, 0.6};
    CHECK(max_drawdown(s) == 0.0);

    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        const WealthSeries w = from_returns(random_returns(rng, 60, 0.0, 0.1));
        CHECK(max_drawdown(w) == brute_force_mdd(w));
        WealthSeries longer = w;
        longer.values.push_back(longer.values.back() * 0.7);
        CHECK(max_drawdown(longer) >= max_drawdown(w));
        CHECK(max_drawdown(w) < 1.0);
    }
}

TEST_CASE("tc_adjusted_wealth") {
    Rng rng(6);
    const Matrix X = random_price_relatives(rng, 5, 3);
    std::vector<Vector> ports(5);
    std::normal_distribution<double> normal(0.3, 0.3);
    for (auto& w : ports) {
        w = Vector(3);
        for (Index j = 0; j < 3; ++j) w[j] = normal(rng);
        w /= w.sum();
    }

    double frictionless = 1.0;
    for (Index t = 0; t < 5; ++t) frictionless *= X.row(t).dot(ports[static_cast<std::size_t>(t)]);
    CHECK(tc_adjusted_wealth(X, ports, 0.0) == frictionless);

    // step-by-step oracle
    const double nu = 0.003;
    double s = 1.0;
    Vector held = Vector::Zero(3);
    for (Index t = 0; t < 5; ++t) {
        const Vector& w = ports[static_cast<std::size_t>(t)];
        const double gross = X.row(t).dot(w);
        double turnover = 0.0;
        for (Index j = 0; j < 3; ++j) turnover += std::abs(w[j] - held[j]);
        s *= gross * (1.0 - nu / 2.0 * turnover);
        for (Index j = 0; j < 3; ++j) held[j] = w[j] * X(t, j) / gross;
    }
    CHECK(tc_adjusted_wealth(X, ports, nu) == doctest::Approx(s).epsilon(1e-14));

    Matrix one(1, 2);
    one << 1.2, 0.9;
    Vector w(2);
    w << 1.0, 0.0;
    CHECK(tc_adjusted_wealth(one, std::vector<Vector>{w}, 0.004) == doctest::Approx(1.2 * (1.0 - 0.002)));

    double prev = tc_adjusted_wealth(X, ports, 0.0);
    for (double v = 0.001; v < 0.5; v += 0.013) {
        const double cur = tc_adjusted_wealth(X, ports, v);
        CHECK(cur <= prev);
        prev = cur;
    }
    CHECK_THROWS_AS(tc_adjusted_wealth(X, ports, 1.0), InvalidConfig);
    CHECK_THROWS_AS(tc_adjusted_wealth(X, ports, -0.1), InvalidConfig);
    std::vector<Vector> too_many(6, Vector::Constant(3, 1.0 / 3.0));
    CHECK_THROWS_AS(tc_adjusted_wealth(X, too_many, 0.0), DimensionMismatch);
}

TEST_CASE("compute_metrics") {
    Rng rng(7);
    const Matrix X = random_price_relatives(rng, 30, 4);
    const BacktestResult eq = baseline_1overN(X);
    const BacktestResult mk = baseline_market(X);
    const std::vector<double> rates{0.0, 0.001, 0.005};
    const MetricsReport m = compute_metrics(X, eq, mk.wealth, rates);
    CHECK(m.final_cw == eq.wealth.final_wealth());
    CHECK(m.sharpe == sharpe_ratio(eq.wealth));
    CHECK(m.mdd == max_drawdown(eq.wealth));
    CHECK(m.alpha == alpha_factor(eq.wealth, mk.wealth).alpha);
    REQUIRE(m.tc_curve.size() == 3);
    CHECK(m.tc_curve[0].second == m.final_cw);
    CHECK(m.tc_curve[2].second < m.tc_curve[1].second);

    // market against itself: alpha 0, p-value one half
    const MetricsReport self = compute_metrics(X, mk, mk.wealth, rates);
    CHECK(self.alpha_pvalue == doctest::Approx(0.5).epsilon(1e-9));

    // degenerate statistics become NaN
    const Matrix flat = Matrix::Ones(5, 2);
    const BacktestResult f = baseline_1overN(flat);
    const MetricsReport d = compute_metrics(flat, f, baseline_market(flat).wealth, rates);
    CHECK(std::isnan(d.sharpe));
    CHECK(std::isnan(d.alpha));
    CHECK(d.final_cw == 1.0);
}

}  // TEST_SUITE
