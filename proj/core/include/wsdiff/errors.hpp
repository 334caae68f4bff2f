#pragma once

#include <stdexcept>

namespace wsdiff {

// Numerical failure (NaN loss, ill-conditioned solve, solver breakdown).
// The CLI maps this to its own exit code, distinct from validation errors.
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace wsdiff
