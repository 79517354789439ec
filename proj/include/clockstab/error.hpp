#pragma once

#include <stdexcept>
#include <string>

namespace clockstab {

/// Bad argument or violated precondition (maps to CLI exit code 2).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Frequency or parameter outside a validity interval.
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Quadrature produced a non-finite value (exit code 3).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A closed form was evaluated outside its validity domain (exit code 3).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The behavioral PLL diverged (exit code 4).
class InstabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace clockstab
