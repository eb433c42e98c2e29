#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cglmix {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Shape or ownership mismatch: different grids, sizes, misaligned times.
class StructuralError : public Error {
public:
    using Error::Error;
};

// A stated precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

class BlowUpError : public Error {
public:
    BlowUpError(const std::string& what, std::size_t step)
        : Error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cglmix
