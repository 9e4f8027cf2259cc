#pragma once

#include <stdexcept>
#include <string>

namespace gpshift {

/// Positive-definite factorization failed; carries the pivot index (0-based)
/// at which the Cholesky recursion broke down.
class conditioning_error : public std::runtime_error {
public:
    conditioning_error(const std::string& what, int pivot)
        : std::runtime_error(what), pivot_(pivot) {}

    int pivot() const noexcept { return pivot_; }

private:
    int pivot_;
};

/// Requested operation is not defined for the given kernel family/domain.
class unsupported_operation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Covariance-parameter estimation could not produce a usable fit.
class estimation_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace gpshift
