#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace pinem {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad caller input: unknown subsystem label, out-of-range index, mismatched layouts.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Input violates a numerical contract (e.g. non-Hermitian where Hermitian is required).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Requested Hilbert space exceeds the configured dimension cap.
class SizingError : public Error {
 public:
  using Error::Error;
};

/// Fock or ladder truncation is too small for the requested accuracy.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, std::optional<int> suggested_n_max = std::nullopt,
                  std::optional<int> suggested_k_max = std::nullopt)
      : Error(what), suggested_n_max_(suggested_n_max), suggested_k_max_(suggested_k_max) {}

  std::optional<int> suggested_n_max() const { return suggested_n_max_; }
  std::optional<int> suggested_k_max() const { return suggested_k_max_; }

 private:
  std::optional<int> suggested_n_max_;
  std::optional<int> suggested_k_max_;
};

/// Post-selection on an outcome whose probability is numerically zero.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// g2 requested for a state with a vanishing mean photon number.
class UndefinedG2Error : public Error {
 public:
  using Error::Error;
};

/// Malformed or invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pinem
