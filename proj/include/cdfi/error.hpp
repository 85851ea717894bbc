#pragma once

#include <stdexcept>
#include <string>

namespace cdfi {

// Bad model definition or parameters outside the admissible range.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A series, recursion or iteration failed to settle within its budget.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A computation would need more memory/steps than the configured ceiling.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace cdfi
