#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clop {

// Base for all library failures so callers can catch one type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A row fed to normalization has (near-)zero Euclidean norm.
struct ZeroNormRow : Error {
    std::size_t row;
    explicit ZeroNormRow(std::size_t r)
        : Error("zero-norm row at index " + std::to_string(r)), row(r) {}
};

// Positive-pair map is not a fixed-point-free involution.
struct BadPairMap : Error {
    using Error::Error;
};

// Requested more prototypes than the geometry admits.
struct TooManyClasses : Error {
    using Error::Error;
};

// A label is outside [0, k).
struct LabelOutOfRange : Error {
    using Error::Error;
};

// label_fraction too small to cover every class at least once.
struct InsufficientLabels : Error {
    using Error::Error;
};

// Jacobi SVD failed to reach tolerance within the sweep budget.
struct ConvergenceFailure : Error {
    using Error::Error;
};

// A simulated raw embedding row shrank below 1e-12 mid-run.
struct DivergedToZero : Error {
    using Error::Error;
};

// Bad flags / config fields; the CLI maps this to exit code 2.
struct UsageError : Error {
    using Error::Error;
};

} // namespace clop
