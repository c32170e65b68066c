#pragma once

#include <stdexcept>
#include <string>

namespace belpm {

/// Caller supplied an invalid argument (bad size, out-of-range count, ...).
class ArgumentError : public std::invalid_argument {
public:
    explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// A computation produced or would produce an unusable number.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Series generation left the bounded region of the attractor.
class GenerationError : public NumericError {
public:
    GenerationError(const std::string& what, std::size_t step)
        : NumericError(what + " at step " + std::to_string(step)), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Operation requested on a kernel family that has no trainable parameter.
class UnsupportedKernelError : public ArgumentError {
public:
    explicit UnsupportedKernelError(const std::string& what) : ArgumentError(what) {}
};

}  // namespace belpm
