#pragma once

#include <stdexcept>
#include <string>

namespace emdyn {

// Malformed or out-of-contract inputs: bad files, invalid parameters, bad
// configuration. The CLI maps these to exit code 2.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite intermediate values, overflow, failed certification. The CLI
// maps these to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// A likelihood term left the finite range; carries the observation index.
class DomainError : public NumericalError {
public:
    DomainError(const std::string& what, long observation)
        : NumericalError(what), observation_(observation) {}

    long observation() const { return observation_; }

private:
    long observation_;
};

// Some sampled point in the certification ball beats the reference point.
class NotLocalMaxInBall : public NumericalError {
public:
    explicit NotLocalMaxInBall(const std::string& what) : NumericalError(what) {}
};

class InsufficientData : public NumericalError {
public:
    explicit InsufficientData(const std::string& what) : NumericalError(what) {}
};

}  // namespace emdyn
