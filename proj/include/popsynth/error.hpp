#ifndef POPSYNTH_ERROR_HPP
#define POPSYNTH_ERROR_HPP

#include <cstddef>
#include <exception>
#include <stdexcept>
#include <string>

namespace popsynth {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class UnknownColumn : public Error {
public:
    explicit UnknownColumn(const std::string& column)
        : Error("unknown column '" + column + "'"), column_(column) {}
    const std::string& column() const { return column_; }

private:
    std::string column_;
};

// row is 1-based over data rows (header excluded), column 0-based in file order
class UnknownCategoryLabel : public Error {
public:
    UnknownCategoryLabel(std::size_t row, std::size_t column, const std::string& attribute,
                         const std::string& label)
        : Error("unknown category label '" + label + "' for attribute '" + attribute +
                "' at row " + std::to_string(row) + ", column " + std::to_string(column)),
          row_(row),
          column_(column) {}
    std::size_t row() const { return row_; }
    std::size_t column() const { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

class EmptyDataset : public Error {
public:
    EmptyDataset() : Error("dataset has no records") {}
};

class InvalidRate : public Error {
public:
    explicit InvalidRate(double rate)
        : Error("sampling rate must lie in (0, 1], got " + std::to_string(rate)) {}
};

class CyclicGraph : public Error {
public:
    CyclicGraph() : Error("graph contains a cycle") {}
};

class NonPositiveTemperature : public Error {
public:
    explicit NonPositiveTemperature(double tau)
        : Error("temperature must be positive, got " + std::to_string(tau)) {}
};

class SpaceTooLarge : public Error {
public:
    using Error::Error;
};

class AttemptBudgetExceeded : public Error {
public:
    AttemptBudgetExceeded(std::size_t attempts, std::size_t accepted)
        : Error("attempt budget exhausted after " + std::to_string(attempts) + " attempts (" +
                std::to_string(accepted) + " accepted)"),
          attempts_(attempts),
          accepted_(accepted) {}
    std::size_t attempts() const { return attempts_; }
    std::size_t accepted() const { return accepted_; }

private:
    std::size_t attempts_;
    std::size_t accepted_;
};

class EndpointUnavailable : public Error {
public:
    using Error::Error;
};

class ProtocolViolation : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Wraps a failure with the pipeline stage it came from.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what, std::exception_ptr cause = nullptr)
        : Error(stage + ": " + what), stage_(std::move(stage)), cause_(std::move(cause)) {}
    const std::string& stage() const { return stage_; }
    /// The original exception, for callers that dispatch on its type.
    const std::exception_ptr& cause() const { return cause_; }

private:
    std::string stage_;
    std::exception_ptr cause_;
};

/// Runs `f`, re-throwing any library error as a StageError tagged `stage`.
template <class F>
decltype(auto) run_stage(const std::string& stage, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what(), std::current_exception());
    }
}

}  // namespace popsynth

#endif  // POPSYNTH_ERROR_HPP
