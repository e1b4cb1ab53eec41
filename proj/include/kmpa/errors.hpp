#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kmpa {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user-facing configuration (step sizes, bounds, rates, ...).
class InvalidConfig : public Error {
public:
    using Error::Error;
};

/// Vectors or matrices with incompatible shapes; always a caller bug.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A non-finite value appeared in the iterates.
class DivergenceError : public Error {
public:
    DivergenceError(long iteration, const std::string& what)
        : Error(what), iteration_(iteration) {}
    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

/// No point satisfies the constraints of the model.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Degenerate input to a statistic (zero variance, too few samples).
class DegenerateSeries : public Error {
public:
    using Error::Error;
};

/// A window strategy failed while backtesting; carries the trading period (1-based).
class StrategyError : public Error {
public:
    StrategyError(std::size_t period, const std::string& what)
        : Error(what), period_(period) {}
    std::size_t period() const noexcept { return period_; }

private:
    std::size_t period_;
};

/// Problems with input files. `line` is 1-based, 0 when not tied to a line.
class DataError : public Error {
public:
    enum class Kind { Io, Malformed, MissingValue, NonPositive, EmptySelection, DuplicateLabel };

    DataError(Kind kind, std::size_t line, const std::string& what)
        : Error(what), kind_(kind), line_(line) {}
    Kind kind() const noexcept { return kind_; }
    std::size_t line() const noexcept { return line_; }

private:
    Kind kind_;
    std::size_t line_;
};

}  // namespace kmpa
