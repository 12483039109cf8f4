#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sortcycle {

/// Base for every recoverable model error. The CLI maps these to exit code 1.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoRoot : public DomainError {
public:
    using DomainError::DomainError;
};

/// lambda_theta - kappa * eta_Q * eta_Q_theta <= 0: the capital and goods integrals diverge.
class UnboundedCapitalDemand : public DomainError {
public:
    using DomainError::DomainError;
};

class NonFinite : public DomainError {
public:
    using DomainError::DomainError;
};

class BracketFailure : public DomainError {
public:
    using DomainError::DomainError;
};

class NoConvergence : public DomainError {
public:
    using DomainError::DomainError;
};

class GridExit : public DomainError {
public:
    GridExit(const std::string& what, std::size_t period)
        : DomainError(what + " (period " + std::to_string(period) + ")"), period_(period) {}
    std::size_t period() const noexcept { return period_; }

private:
    std::size_t period_;
};

class EmptyPanel : public DomainError {
public:
    using DomainError::DomainError;
};

class InvalidProcess : public DomainError {
public:
    using DomainError::DomainError;
};

}  // namespace sortcycle
