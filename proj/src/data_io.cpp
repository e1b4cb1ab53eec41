#include "kmpa/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>
#include <json.hpp>

#include "kmpa/errors.hpp"

namespace kmpa {

namespace {

using Kind = DataError::Kind;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> tokenize(std::string_view line) {
    std::vector<std::string> out;
    if (line.find(',') != std::string_view::npos) {
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            out.emplace_back(trim(line.substr(start, comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
    } else {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            const std::size_t start = i;
            while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            if (i > start) out.emplace_back(line.substr(start, i - start));
        }
    }
    return out;
}

bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

bool is_missing_sentinel(double v) {
    return std::abs(v + 99.99) < 1e-9 || std::abs(v + 999.0) < 1e-9;
}

struct RawRow {
    std::size_t line;
    std::vector<std::string> tokens;
};

struct Block {
    std::vector<RawRow> rows;
    std::vector<std::string> header;  // tokens of the last non-data line before the block
};

std::vector<Block> split_blocks(const std::string& text) {
    std::vector<Block> blocks;
    std::vector<std::string> last_header;
    bool in_block = false;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = trim(raw);
        if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line = trim(line.substr(3));
        const bool data = !line.empty() && std::isdigit(static_cast<unsigned char>(line.front()));
        if (!data) {
            in_block = false;
            if (!line.empty()) last_header = tokenize(line);
            continue;
        }
        if (!in_block) {
            blocks.push_back(Block{{}, last_header});
            in_block = true;
        }
        blocks.back().rows.push_back(RawRow{line_no, tokenize(line)});
    }
    return blocks;
}

std::vector<std::string> asset_names_from(const std::vector<std::string>& header, std::size_t n) {
    if (header.size() == n + 1) return {header.begin() + 1, header.end()};
    if (header.size() == n) return header;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back(fmt::format("A{}", i + 1));
    return names;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// RFC-4180 record split for a single line (no embedded newlines).
std::vector<std::string> csv_split(std::string_view line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else if (c != '\r') {
            out.back() += c;
        }
    }
    return out;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(Kind::Io, 0, "cannot open " + path.string() + " for writing");
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw DataError(Kind::Io, 0, "failed writing " + path.string());
}

std::string label_for(const std::vector<std::string>& labels, std::size_t t) {
    return t < labels.size() ? labels[t] : std::to_string(t + 1);
}

}  // namespace

std::string format_real(double x) { return fmt::format("{:.17g}", x); }

PriceRelativeMatrix parse_returns(const std::string& text, const LoadOptions& options, LoadStats* stats,
                                  const std::string& source) {
    const std::vector<Block> blocks = split_blocks(text);
    if (options.block >= blocks.size())
        throw DataError(Kind::EmptySelection, 0,
                        fmt::format("{}: data block {} requested but only {} found", source, options.block,
                                    blocks.size()));
    const Block& block = blocks[options.block];

    LoadStats local;
    const std::size_t n = block.rows.front().tokens.size() - 1;
    if (n == 0)
        throw DataError(Kind::Malformed, block.rows.front().line,
                        fmt::format("{}:{}: row has no return columns", source, block.rows.front().line));

    std::vector<std::vector<double>> values;
    std::vector<std::string> labels;
    std::set<std::string> seen;
    for (const RawRow& row : block.rows) {
        ++local.rows_parsed;
        if (row.tokens.size() != n + 1)
            throw DataError(Kind::Malformed, row.line,
                            fmt::format("{}:{}: expected {} columns, found {}", source, row.line, n + 1,
                                        row.tokens.size()));
        const std::string& label = row.tokens.front();
        if (!all_digits(label))
            throw DataError(Kind::Malformed, row.line,
                            fmt::format("{}:{}: bad period label '{}'", source, row.line, label));
        const long period = std::stol(label);
        if ((options.from && period < *options.from) || (options.to && period > *options.to)) {
            ++local.rows_filtered;
            continue;
        }
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) {
            double v;
            if (!parse_double(row.tokens[i + 1], v) || !std::isfinite(v))
                throw DataError(Kind::Malformed, row.line,
                                fmt::format("{}:{}: cannot parse '{}'", source, row.line, row.tokens[i + 1]));
            if (is_missing_sentinel(v))
                throw DataError(Kind::MissingValue, row.line,
                                fmt::format("{}:{}: missing value {} in column {}", source, row.line,
                                            row.tokens[i + 1], i + 1));
            x[i] = options.gross_relatives ? v : 1.0 + v / 100.0;
            if (!(x[i] > 0.0))
                throw DataError(Kind::NonPositive, row.line,
                                fmt::format("{}:{}: nonpositive price relative in column {}", source,
                                            row.line, i + 1));
        }
        if (!seen.insert(label).second)
            throw DataError(Kind::DuplicateLabel, row.line,
                            fmt::format("{}:{}: duplicate period label {}", source, row.line, label));
        values.push_back(std::move(x));
        labels.push_back(label);
        ++local.rows_kept;
    }
    if (stats) *stats = local;
    if (values.empty()) throw DataError(Kind::EmptySelection, 0, source + ": no rows in the selected range");

    PriceRelativeMatrix out;
    out.data.resize(static_cast<Index>(values.size()), static_cast<Index>(n));
    for (std::size_t t = 0; t < values.size(); ++t)
        for (std::size_t i = 0; i < n; ++i) out.data(static_cast<Index>(t), static_cast<Index>(i)) = values[t][i];
    out.period_labels = std::move(labels);
    out.asset_names = asset_names_from(block.header, n);
    return out;
}

PriceRelativeMatrix load_returns_csv(const std::filesystem::path& path, const LoadOptions& options,
                                     LoadStats* stats) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(Kind::Io, 0, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_returns(buf.str(), options, stats, path.string());
}

void write_wealth_csv(const std::filesystem::path& path, const WealthSeries& series,
                      const std::vector<std::string>& period_labels) {
    auto out = open_for_write(path);
    out << "period,label,wealth\n";
    for (std::size_t t = 0; t < series.values.size(); ++t) {
        const std::string label = t == 0 ? "start" : label_for(period_labels, t - 1);
        out << t << ',' << csv_field(label) << ',' << format_real(series.values[t]) << '\n';
    }
    finish(out, path);
}

LabeledWealth read_wealth_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(Kind::Io, 0, "cannot open " + path.string());
    LabeledWealth out;
    out.series.values.clear();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        if (line_no == 1) {
            if (trim(line) != "period,label,wealth")
                throw DataError(Kind::Malformed, 1, path.string() + ": expected header period,label,wealth");
            continue;
        }
        const auto fields = csv_split(line);
        double w;
        if (fields.size() != 3 || !parse_double(trim(fields[2]), w))
            throw DataError(Kind::Malformed, line_no, fmt::format("{}:{}: malformed row", path.string(), line_no));
        if (!out.series.values.empty()) out.labels.push_back(fields[1]);
        out.series.values.push_back(w);
    }
    if (out.series.values.empty()) throw DataError(Kind::EmptySelection, 0, path.string() + ": no wealth rows");
    return out;
}

void write_portfolios_csv(const std::filesystem::path& path, const std::vector<Vector>& portfolios,
                          const std::vector<std::string>& asset_names,
                          const std::vector<std::string>& period_labels) {
    auto out = open_for_write(path);
    out << "period,label";
    for (const auto& name : asset_names) out << ',' << csv_field(name);
    out << '\n';
    for (std::size_t t = 0; t < portfolios.size(); ++t) {
        out << t + 1 << ',' << csv_field(label_for(period_labels, t));
        for (Index i = 0; i < portfolios[t].size(); ++i) out << ',' << format_real(portfolios[t][i]);
        out << '\n';
    }
    finish(out, path);
}

namespace {

struct Entry {
    std::string key;
    double value;
    bool integral = false;
};

std::vector<Entry> flatten(const StrategyReport& r) {
    const auto& m = r.metrics;
    const auto& b = r.backtest;
    std::vector<Entry> e{
        {"final_cw", m.final_cw},
        {"sharpe", m.sharpe},
        {"alpha", m.alpha},
        {"beta", m.beta_capm},
        {"alpha_pvalue", m.alpha_pvalue},
        {"mdd", m.mdd},
        {"periods", static_cast<double>(b.wealth.periods()), true},
        {"bankrupt", b.bankrupt ? 1.0 : 0.0, true},
        {"bankrupt_period", b.bankrupt_period ? static_cast<double>(*b.bankrupt_period) : 0.0, true},
        {"strategy_solves", static_cast<double>(b.strategy_solves), true},
        {"nonconverged_solves", static_cast<double>(b.nonconverged_solves), true},
        {"total_iterations", static_cast<double>(b.total_iterations), true},
    };
    for (const auto& [nu, cw] : m.tc_curve) e.push_back({fmt::format("tc_cw_nu_{}", nu), cw});
    return e;
}

}  // namespace

void write_metrics(const std::filesystem::path& path, const std::vector<StrategyReport>& reports,
                   ReportFormat format) {
    auto out = open_for_write(path);
    if (format == ReportFormat::Json) {
        nlohmann::ordered_json root = nlohmann::ordered_json::object();
        for (const auto& r : reports) {
            nlohmann::ordered_json obj = nlohmann::ordered_json::object();
            for (const auto& [key, value, integral] : flatten(r)) {
                if (integral) {
                    obj[key] = static_cast<long long>(value);
                } else if (std::isfinite(value)) {
                    obj[key] = value;
                } else {
                    obj[key] = nullptr;
                    obj[key + "_nonfinite"] = true;
                }
            }
            root[r.name] = std::move(obj);
        }
        out << root.dump(2) << '\n';
    } else {
        out << "strategy,key,value\n";
        for (const auto& r : reports) {
            for (const auto& [key, value, integral] : flatten(r)) {
                out << csv_field(r.name) << ',' << key << ',';
                if (std::isfinite(value)) {
                    out << format_real(value) << '\n';
                } else {
                    out << '\n' << csv_field(r.name) << ',' << key << "_nonfinite,1\n";
                }
            }
        }
    }
    finish(out, path);
}

void export_report(const StrategyReport& report, const std::filesystem::path& dir, ReportFormat format,
                   const PriceRelativeMatrix& data) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError(Kind::Io, 0, "cannot create " + dir.string() + ": " + ec.message());
    write_wealth_csv(dir / (report.name + "_wealth.csv"), report.backtest.wealth, data.period_labels);
    write_portfolios_csv(dir / (report.name + "_portfolios.csv"), report.backtest.portfolios, data.asset_names,
                         data.period_labels);
    write_metrics(dir / (report.name + (format == ReportFormat::Json ? "_metrics.json" : "_metrics.csv")),
                  {report}, format);
}

}  // namespace kmpa
