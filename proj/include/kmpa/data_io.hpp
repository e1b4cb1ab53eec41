#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kmpa/backtest.hpp"
#include "kmpa/metrics.hpp"

namespace kmpa {

/// Per-period gross returns (price relatives), periods in rows.
struct PriceRelativeMatrix {
    Matrix data;
    std::vector<std::string> asset_names;
    std::vector<std::string> period_labels;

    Index periods() const noexcept { return data.rows(); }
    Index assets() const noexcept { return data.cols(); }
};

struct LoadOptions {
    std::optional<int> from;  ///< inclusive YYYYMM
    std::optional<int> to;    ///< inclusive YYYYMM
    bool gross_relatives = false;  ///< values are already x, not percent returns
    /// French-library files stack several tables (value weighted, equal
    /// weighted, annual, ...). Each run of consecutive data rows is a block.
    std::size_t block = 0;
};

struct LoadStats {
    std::size_t rows_parsed = 0;    ///< data rows in the chosen block
    std::size_t rows_kept = 0;      ///< inside the date range
    std::size_t rows_filtered = 0;  ///< outside the date range
};

/// Reads `YYYYMM, r_1, ..., r_N` rows (comma or whitespace delimited). Lines
/// whose first character is not a digit are treated as headers/comments.
/// Percent returns become x = 1 + r / 100. Missing-value sentinels (-99.99,
/// -999) are rejected with their line number.
PriceRelativeMatrix load_returns_csv(const std::filesystem::path& path, const LoadOptions& options = {},
                                     LoadStats* stats = nullptr);

/// Same parser over in-memory text; `source` names it in error messages.
PriceRelativeMatrix parse_returns(const std::string& text, const LoadOptions& options = {},
                                  LoadStats* stats = nullptr, const std::string& source = "<memory>");

/// 17 significant digits, enough to round-trip any double.
std::string format_real(double x);

/// `period,label,wealth` with one row per S^(0..T); label of S^(0) is "start".
void write_wealth_csv(const std::filesystem::path& path, const WealthSeries& series,
                      const std::vector<std::string>& period_labels);

struct LabeledWealth {
    WealthSeries series;
    std::vector<std::string> labels;  ///< labels of S^(1..T)
};

LabeledWealth read_wealth_csv(const std::filesystem::path& path);

/// `period,label,<asset names...>`; header only when the history is empty.
void write_portfolios_csv(const std::filesystem::path& path, const std::vector<Vector>& portfolios,
                          const std::vector<std::string>& asset_names,
                          const std::vector<std::string>& period_labels);

enum class ReportFormat { Csv, Json };

struct StrategyReport {
    std::string name;
    MetricsReport metrics;
    BacktestResult backtest;
};

/// Flat key/value metrics in the given format; non-finite values become null
/// (JSON) or empty (CSV) with a companion `<key>_nonfinite` flag.
void write_metrics(const std::filesystem::path& path, const std::vector<StrategyReport>& reports,
                   ReportFormat format);

/// Writes <dir>/<name>_wealth.csv, <dir>/<name>_portfolios.csv and
/// <dir>/<name>_metrics.{csv,json}.
void export_report(const StrategyReport& report, const std::filesystem::path& dir, ReportFormat format,
                   const PriceRelativeMatrix& data);

}  // namespace kmpa
