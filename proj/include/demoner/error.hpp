#pragma once

#include <stdexcept>
#include <string>

namespace demoner {

// Error taxonomy. The CLI maps each class onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or configuration (exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training (exit code 4).
class TrainingDivergence : public Error {
 public:
  using Error::Error;
};

// A remote service could not be reached or answered garbage.
class ProviderError : public Error {
 public:
  using Error::Error;
};

}  // namespace demoner
