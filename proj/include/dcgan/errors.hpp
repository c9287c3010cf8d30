#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dcgan {

// Two families matter to callers: validation problems (bad input, bad
// configuration, malformed files) and numerical failures (NaN/Inf, indefinite
// matrices, failed gradient checks). The CLI maps them to exit codes 1 and 2.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class SpecError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IoError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IncompatibleCheckpoint : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Raised when a Gaussian is fitted to n samples in d dimensions with n <= d.
/// The covariance would be rank deficient and its square root meaningless.
class SampleCountTooSmall : public ValidationError {
public:
    SampleCountTooSmall(std::size_t n, std::size_t d)
        : ValidationError("SampleCountTooSmall: n=" + std::to_string(n) +
                          " samples is not greater than embedding dimension d=" + std::to_string(d) +
                          "; reduce d or add samples"),
          n_(n),
          d_(d) {}

    std::size_t samples() const { return n_; }
    std::size_t dimension() const { return d_; }

private:
    std::size_t n_;
    std::size_t d_;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace dcgan
