#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "kmpa/data_io.hpp"
#include "kmpa/errors.hpp"
#include "kmpa/metrics.hpp"
#include "kmpa/mpaerl.hpp"

namespace kmpa::cli {

namespace {

namespace fs = std::filesystem;

struct RunConfig {
    std::string data;
    std::optional<int> from;
    std::optional<int> to;
    int window = 18;
    double tau = 1.0;
    double rho_lo = 0.03;
    double rho_hi = 0.1;
    double varrho = 0.8;
    double delta = 3.0;
    double tol = 1e-8;
    long max_iter = 10000;
    std::vector<double> tc_rates{0.0, 0.001, 0.002, 0.003, 0.004, 0.005};
    std::string out;
    std::string format = "json";
    bool gross_relatives = false;
    bool serial = false;

    MpaerlParams params() const {
        MpaerlParams p;
        p.tau = tau;
        p.rho_lo = rho_lo;
        p.rho_hi = rho_hi;
        p.solver.varrho = varrho;
        p.solver.delta = delta;
        p.solver.tol = tol;
        p.solver.max_iter = max_iter;
        return p;
    }

    ReportFormat report_format() const { return format == "csv" ? ReportFormat::Csv : ReportFormat::Json; }

    void validate() const {
        if (window < 1) throw InvalidConfig("--window must be >= 1");
        for (double nu : tc_rates)
            if (!(nu >= 0.0 && nu < 1.0)) throw InvalidConfig("--tc-rates entries must lie in [0, 1)");
        if (from && to && *from > *to) throw InvalidConfig("--from must not be after --to");
        params().validate();
    }
};

void add_data_options(CLI::App& cmd, RunConfig& cfg) {
    cmd.add_option("--data", cfg.data, "Return table (YYYYMM, r_1, ..., r_N)")->required();
    cmd.add_option("--from", cfg.from, "First period to load (YYYYMM, inclusive)");
    cmd.add_option("--to", cfg.to, "Last period to load (YYYYMM, inclusive)");
    cmd.add_flag("--gross-relatives", cfg.gross_relatives, "Values are price relatives, not percent returns");
}

void add_model_options(CLI::App& cmd, RunConfig& cfg) {
    cmd.add_option("--tau", cfg.tau, "l1 weight")->capture_default_str();
    cmd.add_option("--rho-lo", cfg.rho_lo, "Lower bound of the expected-return level")->capture_default_str();
    cmd.add_option("--rho-hi", cfg.rho_hi, "Upper bound of the expected-return level")->capture_default_str();
    cmd.add_option("--varrho", cfg.varrho, "Momentum amplitude in (-1, 1)")->capture_default_str();
    cmd.add_option("--delta", cfg.delta, "Momentum warm-up (> 0)")->capture_default_str();
    cmd.add_option("--tol", cfg.tol, "Relative-change tolerance")->capture_default_str();
    cmd.add_option("--max-iter", cfg.max_iter, "Iteration cap")->capture_default_str();
}

void add_output_options(CLI::App& cmd, RunConfig& cfg, const std::string& out_help) {
    cmd.add_option("--out", cfg.out, out_help);
    cmd.add_option("--format", cfg.format, "Report format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
}

fs::path resolve_data_path(const std::string& data) {
    fs::path p(data);
    if (p.is_relative() && !fs::exists(p)) {
        if (const char* dir = std::getenv(kDataDirEnv); dir && *dir) {
            const fs::path alt = fs::path(dir) / p;
            if (fs::exists(alt)) return alt;
        }
    }
    return p;
}

PriceRelativeMatrix load(const RunConfig& cfg) {
    LoadOptions opt;
    opt.from = cfg.from;
    opt.to = cfg.to;
    opt.gross_relatives = cfg.gross_relatives;
    return load_returns_csv(resolve_data_path(cfg.data), opt);
}

WindowStrategy mpaerl_strategy(const MpaerlParams& params) {
    return [params](const Matrix& window) {
        const Portfolio p = solve_window(window, params);
        return WindowDecision{p.weights, p.diagnostics.converged, p.diagnostics.iterations};
    };
}

struct BacktestBundle {
    std::vector<StrategyReport> reports;  // mpaerl, 1overN, market
};

BacktestBundle run_all(const PriceRelativeMatrix& data, const RunConfig& cfg) {
    const MpaerlParams params = cfg.params();
    BacktestBundle b;
    BacktestResult market = baseline_market(data.data);
    BacktestResult strategy = run_backtest(data.data, cfg.window, mpaerl_strategy(params),
                                           cfg.serial ? Execution::Serial : Execution::Parallel);
    BacktestResult one_over_n = baseline_1overN(data.data);
    const WealthSeries market_wealth = market.wealth;
    auto report = [&](std::string name, BacktestResult r) {
        MetricsReport m = compute_metrics(data.data, r, market_wealth, cfg.tc_rates);
        b.reports.push_back(StrategyReport{std::move(name), std::move(m), std::move(r)});
    };
    report("mpaerl", std::move(strategy));
    report("1overN", std::move(one_over_n));
    report("market", std::move(market));
    return b;
}

std::string fmt_metric(double x) { return std::isfinite(x) ? fmt::format("{:.6g}", x) : "nan"; }

int cmd_solve(const RunConfig& cfg, bool window_given, std::ostream& out) {
    cfg.validate();
    const PriceRelativeMatrix data = load(cfg);
    Index rows = data.periods();
    if (window_given) rows = std::min<Index>(rows, cfg.window);
    const Matrix window = data.data.bottomRows(rows);
    const Portfolio p = solve_window(window, cfg.params());
    const auto& d = p.diagnostics;

    fmt::print(out, "window: {} periods x {} assets ({} .. {})\n", rows, data.assets(),
               data.period_labels[static_cast<std::size_t>(data.periods() - rows)], data.period_labels.back());
    for (Index i = 0; i < p.weights.size(); ++i)
        fmt::print(out, "w[{}] {} = {}\n", i + 1, data.asset_names[static_cast<std::size_t>(i)],
                   format_real(p.weights[i]));
    fmt::print(out, "rho = {}\n", format_real(p.rho));
    fmt::print(out, "iterations = {}\nconverged = {}\nrelative_change = {}\n", d.iterations,
               d.converged ? "true" : "false", format_real(d.final_relative_change));
    fmt::print(out, "fixed_point_residual = {}\nobjective = {}\n", format_real(d.fixed_point_residual),
               format_real(d.objective));
    fmt::print(out, "budget_residual = {}\nreturn_residual = {}\nfeasibility = {}\ncomplementarity = {}\n",
               format_real(d.budget_residual), format_real(d.return_residual),
               format_real(d.kkt.primal_infeasibility), format_real(d.kkt.complementarity));

    if (!cfg.out.empty()) {
        std::ofstream f(cfg.out, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError(DataError::Kind::Io, 0, "cannot open " + cfg.out);
        if (cfg.report_format() == ReportFormat::Json) {
            nlohmann::ordered_json j;
            nlohmann::ordered_json w = nlohmann::ordered_json::object();
            for (Index i = 0; i < p.weights.size(); ++i) w[data.asset_names[static_cast<std::size_t>(i)]] = p.weights[i];
            j["weights"] = std::move(w);
            j["rho"] = p.rho;
            j["iterations"] = d.iterations;
            j["converged"] = d.converged;
            j["relative_change"] = d.final_relative_change;
            j["fixed_point_residual"] = d.fixed_point_residual;
            j["objective"] = d.objective;
            j["budget_residual"] = d.budget_residual;
            j["return_residual"] = d.return_residual;
            f << j.dump(2) << '\n';
        } else {
            f << "asset,weight\n";
            for (Index i = 0; i < p.weights.size(); ++i)
                f << data.asset_names[static_cast<std::size_t>(i)] << ',' << format_real(p.weights[i]) << '\n';
            f << "rho," << format_real(p.rho) << '\n';
        }
        if (!f) throw DataError(DataError::Kind::Io, 0, "failed writing " + cfg.out);
    }
    return d.converged ? kOk : kSolverError;
}

void write_tc_curve(const fs::path& path, const std::vector<StrategyReport>& reports) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError(DataError::Kind::Io, 0, "cannot open " + path.string());
    f << "nu";
    for (const auto& r : reports) f << ',' << r.name;
    f << '\n';
    const std::size_t rows = reports.empty() ? 0 : reports.front().metrics.tc_curve.size();
    for (std::size_t i = 0; i < rows; ++i) {
        f << format_real(reports.front().metrics.tc_curve[i].first);
        for (const auto& r : reports) f << ',' << format_real(r.metrics.tc_curve[i].second);
        f << '\n';
    }
    if (!f) throw DataError(DataError::Kind::Io, 0, "failed writing " + path.string());
}

int cmd_backtest(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const PriceRelativeMatrix data = load(cfg);
    const BacktestBundle b = run_all(data, cfg);
    const fs::path dir = cfg.out.empty() ? fs::path("kmpa_out") : fs::path(cfg.out);
    for (const auto& r : b.reports) export_report(r, dir, cfg.report_format(), data);
    write_metrics(dir / (cfg.report_format() == ReportFormat::Json ? "metrics.json" : "metrics.csv"), b.reports,
                  cfg.report_format());
    write_tc_curve(dir / "tc_curve.csv", b.reports);

    fmt::print(out, "{} periods x {} assets, window {}\n", data.periods(), data.assets(), cfg.window);
    fmt::print(out, "{:<8} {:>14} {:>10} {:>10} {:>10} {:>8}\n", "strategy", "final_cw", "sharpe", "alpha",
               "p-value", "mdd");
    for (const auto& r : b.reports) {
        const auto& m = r.metrics;
        fmt::print(out, "{:<8} {:>14} {:>10} {:>10} {:>10} {:>8}\n", r.name, fmt_metric(m.final_cw),
                   fmt_metric(m.sharpe), fmt_metric(m.alpha), fmt_metric(m.alpha_pvalue), fmt_metric(m.mdd));
    }
    const auto& mp = b.reports.front().backtest;
    fmt::print(out, "mpaerl solves: {} ({} hit max-iter), outputs in {}\n", mp.strategy_solves,
               mp.nonconverged_solves, dir.string());
    if (mp.bankrupt) {
        fmt::print(out, "mpaerl went bankrupt in period {}\n", *mp.bankrupt_period);
        return kBankrupt;
    }
    return kOk;
}

int cmd_metrics(const std::string& series_path, const std::string& market_path, const RunConfig& cfg,
                std::ostream& out) {
    const LabeledWealth s = read_wealth_csv(series_path);
    MetricsReport m;
    m.final_cw = s.series.final_wealth();
    m.mdd = max_drawdown(s.series);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    try {
        m.sharpe = sharpe_ratio(s.series);
    } catch (const DegenerateSeries&) {
        m.sharpe = nan;
    }
    m.alpha = m.beta_capm = m.alpha_pvalue = nan;
    if (!market_path.empty()) {
        const LabeledWealth mk = read_wealth_csv(market_path);
        try {
            const AlphaResult a = alpha_factor(s.series, mk.series);
            m.alpha = a.alpha;
            m.beta_capm = a.beta;
            m.alpha_pvalue = a.pvalue;
        } catch (const DegenerateSeries&) {
        }
    }
    fmt::print(out, "final_cw = {}\nsharpe = {}\nalpha = {}\nbeta = {}\nalpha_pvalue = {}\nmdd = {}\n",
               fmt_metric(m.final_cw), fmt_metric(m.sharpe), fmt_metric(m.alpha), fmt_metric(m.beta_capm),
               fmt_metric(m.alpha_pvalue), fmt_metric(m.mdd));
    if (!cfg.out.empty()) {
        StrategyReport r{fs::path(series_path).stem().string(), m, BacktestResult{}};
        r.backtest.wealth = s.series;
        write_metrics(cfg.out, {r}, cfg.report_format());
    }
    return kOk;
}

int cmd_sweep(RunConfig cfg, const std::string& param, const std::vector<double>& grid, std::ostream& out) {
    if (grid.empty()) throw InvalidConfig("--grid must contain at least one value");
    cfg.validate();
    const PriceRelativeMatrix data = load(cfg);

    std::ostringstream table;
    table << "param,value,final_cw,sharpe,status\n";
    for (double value : grid) {
        RunConfig cell = cfg;
        std::string status = "ok";
        std::string cw, sr;
        try {
            if (param == "tau") cell.tau = value;
            else if (param == "rho-lo") cell.rho_lo = value;
            else if (param == "rho-hi") cell.rho_hi = value;
            else if (param == "varrho") cell.varrho = value;
            else if (param == "delta") cell.delta = value;
            else if (param == "window") cell.window = static_cast<int>(value);
            cell.validate();
            const BacktestResult r = run_backtest(data.data, cell.window, mpaerl_strategy(cell.params()),
                                                  cell.serial ? Execution::Serial : Execution::Parallel);
            cw = format_real(r.wealth.final_wealth());
            try {
                sr = format_real(sharpe_ratio(r.wealth));
            } catch (const DegenerateSeries&) {
                sr.clear();
            }
            if (r.bankrupt) status = fmt::format("bankrupt@{}", *r.bankrupt_period);
        } catch (const std::exception& e) {
            status = std::string("error: ") + e.what();
            std::replace(status.begin(), status.end(), '\n', ' ');
        }
        std::string quoted = status;
        if (quoted.find_first_of(",\"") != std::string::npos) {
            std::string q = "\"";
            for (char c : quoted) {
                if (c == '"') q += '"';
                q += c;
            }
            quoted = q + "\"";
        }
        table << param << ',' << format_real(value) << ',' << cw << ',' << sr << ',' << quoted << '\n';
    }
    out << table.str();
    if (!cfg.out.empty()) {
        std::ofstream f(cfg.out, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError(DataError::Kind::Io, 0, "cannot open " + cfg.out);
        f << table.str();
        if (!f) throw DataError(DataError::Kind::Io, 0, "failed writing " + cfg.out);
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adaptive-return Markowitz portfolios solved with a Krasnoselskii-Mann proximity algorithm"};
    app.require_subcommand(1);

    RunConfig cfg;
    auto* solve_cmd = app.add_subcommand("solve", "Solve one window and print the portfolio");
    add_data_options(*solve_cmd, cfg);
    add_model_options(*solve_cmd, cfg);
    solve_cmd->add_option("--window", cfg.window, "Use only the trailing WINDOW periods");
    add_output_options(*solve_cmd, cfg, "Also write the portfolio to this file");
    solve_cmd->add_flag("--serial", cfg.serial, "Ignored; accepted for symmetry");

    auto* backtest_cmd = app.add_subcommand("backtest", "Moving-window backtest against 1/N and Market");
    add_data_options(*backtest_cmd, cfg);
    add_model_options(*backtest_cmd, cfg);
    backtest_cmd->add_option("--window", cfg.window, "Window length T")->capture_default_str();
    backtest_cmd->add_option("--tc-rates", cfg.tc_rates, "Transaction-cost rates")->delimiter(',');
    add_output_options(*backtest_cmd, cfg, "Output directory (default kmpa_out)");
    backtest_cmd->add_flag("--serial", cfg.serial, "Solve windows on one thread");

    std::string series_path, market_path;
    auto* metrics_cmd = app.add_subcommand("metrics", "Metrics of a stored wealth series");
    metrics_cmd->add_option("--series", series_path, "Wealth CSV (period,label,wealth)")->required();
    metrics_cmd->add_option("--market", market_path, "Market wealth CSV for the alpha regression");
    add_output_options(*metrics_cmd, cfg, "Write the metrics to this file");

    std::string sweep_param;
    std::vector<double> grid;
    auto* sweep_cmd = app.add_subcommand("sweep", "One backtest per value of a parameter grid");
    add_data_options(*sweep_cmd, cfg);
    add_model_options(*sweep_cmd, cfg);
    sweep_cmd->add_option("--window", cfg.window, "Window length T")->capture_default_str();
    sweep_cmd->add_option("--param", sweep_param, "Parameter to vary")
        ->required()
        ->check(CLI::IsMember({"tau", "rho-lo", "rho-hi", "varrho", "delta", "window"}));
    sweep_cmd->add_option("--grid", grid, "Comma-separated values")->required()->delimiter(',');
    sweep_cmd->add_option("--out", cfg.out, "Write the table to this CSV file");
    sweep_cmd->add_flag("--serial", cfg.serial, "Solve windows on one thread");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        if (*solve_cmd) return cmd_solve(cfg, solve_cmd->count("--window") > 0, out);
        if (*backtest_cmd) return cmd_backtest(cfg, out);
        if (*metrics_cmd) return cmd_metrics(series_path, market_path, cfg, out);
        if (*sweep_cmd) return cmd_sweep(cfg, sweep_param, grid, out);
    } catch (const InvalidConfig& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << '\n';
        return kConfigError;
    } catch (const DivergenceError& e) {
        err << "solver error: " << e.what() << '\n';
        return kSolverError;
    } catch (const StrategyError& e) {
        err << "solver error: " << e.what() << '\n';
        return kSolverError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInternalError;
    }
    return kConfigError;
}

}  // namespace kmpa::cli
