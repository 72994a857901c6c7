#pragma once

#include <stdexcept>
#include <string>

namespace gapcond {

// Exit codes of the command line tool map onto these categories.
enum class ErrorKind { config = 2, solver = 3, fit = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

/// Invalid input: geometry, boundary data, configuration, or an argument outside its domain.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// A point or radius outside the set where a quantity is defined.
class DomainError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Meshing or linear-solve failure.
class SolverError : public Error {
public:
    explicit SolverError(const std::string& what) : Error(ErrorKind::solver, what) {}
};

class ResolutionError : public SolverError {
public:
    using SolverError::SolverError;
};

/// Least-squares fit or extrapolation refused or failed.
class FitError : public Error {
public:
    explicit FitError(const std::string& what) : Error(ErrorKind::fit, what) {}
};

} // namespace gapcond
