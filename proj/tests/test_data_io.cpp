#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "kmpa/data_io.hpp"
#include "kmpa/errors.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace kmpa;
using namespace kmpa::testing;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

DataError::Kind kind_of(const std::string& text, const LoadOptions& opt = {}) {
    try {
        parse_returns(text, opt);
    } catch (const DataError& e) {
        return e.kind();
    }
    FAIL("expected DataError");
    return DataError::Kind::Io;
}

std::size_t line_of(const std::string& text) {
    try {
        parse_returns(text);
    } catch (const DataError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST_SUITE("data_io") {

TEST_CASE("percent returns become price relatives") {
    const PriceRelativeMatrix m = parse_returns("197107, 1.23, -0.5\n");
    REQUIRE(m.periods() == 1);
    REQUIRE(m.assets() == 2);
    CHECK(m.data(0, 0) == 1.0 + 1.23 / 100.0);
    CHECK(m.data(0, 1) == 0.995);
    CHECK(m.period_labels == std::vector<std::string>{"197107"});
    CHECK(m.asset_names == std::vector<std::string>{"A1", "A2"});

    LoadOptions gross;
    gross.gross_relatives = true;
    CHECK(parse_returns("1,1.5,0.75\n", gross).data(0, 1) == 0.75);
}

TEST_CASE("French-library layout: header, whitespace and stacked blocks") {
    const std::string text =
        "This file was created using the 202306 CRSP database.\n"
        "\n"
        "  Average Value Weighted Returns -- Monthly\n"
        "         SMALL LoBM  ME1 BM2  BIG HiBM\n"
        "197106     1.00   -2.00    3.00\n"
        "197107     0.50    0.25  -99.99\n"
        "\n"
        "  Average Equal Weighted Returns -- Monthly\n"
        "         SMALL LoBM  ME1 BM2  BIG HiBM\n"
        "197106     2.00   -1.00    0.00\n";
    LoadOptions first;
    first.to = 197106;
    LoadStats stats;
    const PriceRelativeMatrix m = parse_returns(text, first, &stats);
    CHECK(m.periods() == 1);
    CHECK(stats.rows_parsed == 2);
    CHECK(stats.rows_kept == 1);
    CHECK(stats.rows_filtered == 1);
    CHECK(stats.rows_kept + stats.rows_filtered == stats.rows_parsed);

    // the sentinel row is only an error when it is selected
    CHECK(kind_of(text) == DataError::Kind::MissingValue);
    CHECK(line_of(text) == 6);

    LoadOptions second;
    second.block = 1;
    const PriceRelativeMatrix eq = parse_returns(text, second);
    CHECK(eq.data(0, 0) == 1.02);

    LoadOptions missing;
    missing.block = 2;
    CHECK(kind_of(text, missing) == DataError::Kind::EmptySelection);
}

TEST_CASE("comma header names the assets") {
    const PriceRelativeMatrix m = parse_returns("date,Lo 10,Hi 10\n200001,1,2\n200002,3,4\n");
    CHECK(m.asset_names == std::vector<std::string>{"Lo 10", "Hi 10"});
    CHECK(m.period_labels == std::vector<std::string>{"200001", "200002"});
}

TEST_CASE("loader errors") {
    CHECK(kind_of("197107, 1.0, -999\n") == DataError::Kind::MissingValue);
    CHECK(kind_of("197107, 1.0, -99.99\n") == DataError::Kind::MissingValue);
    CHECK(kind_of("197107, 1.0, abc\n") == DataError::Kind::Malformed);
    CHECK(kind_of("197107, 1.0\n197108, 1.0, 2.0\n") == DataError::Kind::Malformed);
    CHECK(line_of("x\n197107, 1.0\n197108, 1.0, 2.0\n") == 3);
    CHECK(kind_of("197107, 1.0, -100\n") == DataError::Kind::NonPositive);
    CHECK(kind_of("197107, 1.0\n197107, 2.0\n") == DataError::Kind::DuplicateLabel);
    CHECK(kind_of("1971-07, 1.0\n") == DataError::Kind::Malformed);
    CHECK(kind_of("197107\n") == DataError::Kind::Malformed);
    CHECK(kind_of("header only\n") == DataError::Kind::EmptySelection);
    LoadOptions range;
    range.from = 200001;
    CHECK(kind_of("197107, 1.0\n", range) == DataError::Kind::EmptySelection);
    CHECK_THROWS_AS(load_returns_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("date filter reproduces a 623-month range") {
    std::ostringstream text;
    text << ",A,B\n";
    for (int y = 1926; y <= 2023; ++y)
        for (int mth = 1; mth <= 12; ++mth) text << y * 100 + mth << ",0.5,1.5\n";
    LoadOptions opt;
    opt.from = 197107;
    opt.to = 202305;
    LoadStats stats;
    const PriceRelativeMatrix m = parse_returns(text.str(), opt, &stats);
    CHECK(m.periods() == 623);
    CHECK(m.period_labels.front() == "197107");
    CHECK(m.period_labels.back() == "202305");
    CHECK(stats.rows_kept + stats.rows_filtered == stats.rows_parsed);
}

TEST_CASE("wealth CSV round trip is bit exact") {
    TempDir dir;
    Rng rng(1);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    WealthSeries s;
    for (int i = 0; i < 50; ++i) s.values.push_back(s.values.back() * u(rng));
    s.values.push_back(std::numeric_limits<double>::denorm_min());
    std::vector<std::string> labels;
    for (int i = 0; i < 51; ++i) labels.push_back(std::to_string(200001 + i));
    labels[3] = "has,comma";
    write_wealth_csv(dir / "w.csv", s, labels);
    const LabeledWealth back = read_wealth_csv(dir / "w.csv");
    CHECK(back.series.values == s.values);
    CHECK(back.labels == labels);
    const std::string text = slurp(dir / "w.csv");
    CHECK(text.rfind("period,label,wealth\n0,start,1\n", 0) == 0);
    CHECK(text.find("\"has,comma\"") != std::string::npos);

    spit(dir / "bad.csv", "nope\n");
    CHECK_THROWS_AS(read_wealth_csv(dir / "bad.csv"), DataError);
}

TEST_CASE("portfolio CSV") {
    TempDir dir;
    write_portfolios_csv(dir / "empty.csv", {}, {"A", "B"}, {});
    CHECK(slurp(dir / "empty.csv") == "period,label,A,B\n");

    std::vector<Vector> ports{Vector::Constant(2, 0.5), Vector::Constant(2, 0.1)};
    write_portfolios_csv(dir / "p.csv", ports, {"A", "B"}, {"197107", "197108"});
    CHECK(slurp(dir / "p.csv") ==
          "period,label,A,B\n1,197107,0.5,0.5\n2,197108,0.10000000000000001,0.10000000000000001\n");
}

TEST_CASE("metrics serialization") {
    TempDir dir;
    StrategyReport r;
    r.name = "mpaerl";
    r.metrics.final_cw = 2.5;
    r.metrics.sharpe = std::numeric_limits<double>::quiet_NaN();
    r.metrics.alpha = 0.001;
    r.metrics.beta_capm = 1.0;
    r.metrics.alpha_pvalue = 0.25;
    r.metrics.mdd = 0.1;
    r.metrics.tc_curve = {{0.0, 2.5}, {0.001, 2.4}};
    r.backtest.wealth.values = {1.0, 2.5};
    r.backtest.strategy_solves = 3;

    write_metrics(dir / "m.json", {r}, ReportFormat::Json);
    const auto j = nlohmann::json::parse(slurp(dir / "m.json"));
    CHECK(j["mpaerl"]["final_cw"].get<double>() == 2.5);
    CHECK(j["mpaerl"]["sharpe"].is_null());
    CHECK(j["mpaerl"]["sharpe_nonfinite"].get<bool>());
    CHECK(j["mpaerl"]["periods"].is_number_integer());
    CHECK(j["mpaerl"]["strategy_solves"].get<int>() == 3);
    CHECK(j["mpaerl"]["tc_cw_nu_0.001"].get<double>() == 2.4);
    CHECK(slurp(dir / "m.json").find("NaN") == std::string::npos);

    write_metrics(dir / "m.csv", {r}, ReportFormat::Csv);
    const std::string csv = slurp(dir / "m.csv");
    CHECK(csv.rfind("strategy,key,value\nmpaerl,final_cw,2.5\nmpaerl,sharpe,\nmpaerl,sharpe_nonfinite,1\n", 0) == 0);
}

TEST_CASE("export_report writes all three files") {
    TempDir dir;
    Rng rng(2);
    PriceRelativeMatrix data;
    data.data = random_price_relatives(rng, 3, 2);
    data.asset_names = {"A", "B"};
    data.period_labels = {"1", "2", "3"};
    StrategyReport r;
    r.name = "1overN";
    r.backtest = baseline_1overN(data.data);
    r.metrics = compute_metrics(data.data, r.backtest, baseline_market(data.data).wealth, std::vector<double>{0.0});
    export_report(r, dir / "out", ReportFormat::Json, data);
    CHECK(std::filesystem::exists(dir / "out/1overN_wealth.csv"));
    CHECK(std::filesystem::exists(dir / "out/1overN_portfolios.csv"));
    CHECK(std::filesystem::exists(dir / "out/1overN_metrics.json"));

    // T' + 1 wealth rows plus the header
    const std::string w = slurp(dir / "out/1overN_wealth.csv");
    CHECK(std::count(w.begin(), w.end(), '\n') == 5);
}

TEST_CASE("format_real round trips") {
    Rng rng(3);
    std::normal_distribution<double> n(0.0, 1e3);
    for (int i = 0; i < 1000; ++i) {
        const double x = n(rng);
        CHECK(std::stod(format_real(x)) == x);
    }
}

}  // TEST_SUITE
