#pragma once

#include <stdexcept>
#include <string>

namespace ipp {

/// Bad caller input (grid too small, k larger than the path, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization failed or a matrix that must be SPD is not.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No start-to-goal path fits inside the budget.
class InfeasibleBudget : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An objective was passed to a routine that does not support it.
class WrongObjective : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Internal bookkeeping produced an impossible state (e.g. lower bound above upper bound).
class InconsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ipp
