#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace plpde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Arguments outside the mathematical domain of an operation
/// (dimension out of range, index out of bounds, level outside the range of f).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A point left the admissible cone. `constraint` names the violated
/// defining inequality; `grid_index` is set when the point belongs to a field.
class AdmissibilityError : public Error {
public:
    AdmissibilityError(std::string constraint, std::optional<std::size_t> grid_index = std::nullopt)
        : Error(make_message(constraint, grid_index))
        , constraint_(std::move(constraint))
        , grid_index_(grid_index) {}

    const std::string& constraint() const noexcept { return constraint_; }
    std::optional<std::size_t> grid_index() const noexcept { return grid_index_; }

private:
    static std::string make_message(const std::string& c, std::optional<std::size_t> idx) {
        std::string msg = "inadmissible point: " + c;
        if (idx) msg += " at grid index " + std::to_string(*idx);
        return msg;
    }

    std::string constraint_;
    std::optional<std::size_t> grid_index_;
};

/// Invalid geometry, metric, grid or problem setup. `field_path` locates the
/// offending configuration entry when it comes from a config document.
class ConfigurationError : public Error {
public:
    explicit ConfigurationError(const std::string& message, std::string field_path = {})
        : Error(field_path.empty() ? message : field_path + ": " + message)
        , field_path_(std::move(field_path)) {}

    const std::string& field_path() const noexcept { return field_path_; }

private:
    std::string field_path_;
};

/// Backtracking line search exhausted without an admissible decrease.
class NewtonStall : public Error {
public:
    NewtonStall(const std::string& message, std::size_t worst_point, double residual)
        : Error(message), worst_point_(worst_point), residual_(residual) {}

    std::size_t worst_point() const noexcept { return worst_point_; }
    double residual() const noexcept { return residual_; }

private:
    std::size_t worst_point_;
    double residual_;
};

class LinearSolveFailure : public Error {
public:
    using Error::Error;
};

}  // namespace plpde
