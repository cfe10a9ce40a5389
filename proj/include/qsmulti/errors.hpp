#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace qsmulti {

/// Invalid parameter or state; the message names the offending field.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Non-finite values, non-convergence and similar numerical breakdowns.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An equilibrium class does not exist for the given parameters.
class InfeasibleError : public std::runtime_error {
public:
    InfeasibleError(std::string condition, double margin)
        : std::runtime_error("infeasible: " + condition), condition_(std::move(condition)), margin_(margin) {}

    const std::string& condition() const noexcept { return condition_; }
    /// Signed distance to satisfying the condition (negative means violated).
    double margin() const noexcept { return margin_; }

private:
    std::string condition_;
    double margin_;
};

} // namespace qsmulti
