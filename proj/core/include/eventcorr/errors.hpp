#pragma once

#include <stdexcept>
#include <string>

namespace ecc {

/// Base class for all library errors. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Rank-deficient regression design. Carries the offending column names.
class SingularDesignError : public Error {
public:
    explicit SingularDesignError(const std::string& what) : Error(what) {}
};

/// Event selects fewer rows than the minimum occupancy (3).
class InsufficientEventSampleError : public Error {
public:
    InsufficientEventSampleError(const std::string& what, long selected)
        : Error(what), selected_rows(selected) {}
    long selected_rows;
};

/// A variance or denominator that must be positive is not.
class DegenerateConditioningError : public Error {
public:
    explicit DegenerateConditioningError(const std::string& what) : Error(what) {}
};

/// Iterative fit did not meet its convergence criterion.
class OptimizationFailureError : public Error {
public:
    OptimizationFailureError(const std::string& what, int iterations, double grad_norm)
        : Error(what), iterations(iterations), grad_norm(grad_norm) {}
    int iterations;
    double grad_norm;
};

/// Too many bootstrap replicates failed to produce an estimate.
class UnstableBootstrapError : public Error {
public:
    UnstableBootstrapError(const std::string& what, int failures, int total)
        : Error(what), failures(failures), total(total) {}
    int failures;
    int total;
};

class DimensionMismatchError : public Error {
public:
    explicit DimensionMismatchError(const std::string& what) : Error(what) {}
};

/// Malformed input data; carries a 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, long line = -1) : Error(what), line(line) {}
    long line;
};

/// Monte Carlo truth evaluation cannot reach the requested precision.
class OracleUnstableError : public Error {
public:
    explicit OracleUnstableError(const std::string& what) : Error(what) {}
};

/// A statistic is undefined on the given data (for example a constant column).
class UndefinedStatisticError : public Error {
public:
    explicit UndefinedStatisticError(const std::string& what) : Error(what) {}
};

} // namespace ecc
