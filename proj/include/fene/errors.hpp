#ifndef FENE_ERRORS_HPP_
#define FENE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace fene {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model or run configuration (b <= 2, bad resolution, unknown key).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Evaluation outside the closed ball, or at a singular point of a field.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical invariant could not be established. `invariant()` names it.
class NumericalError : public Error {
 public:
  NumericalError(std::string invariant, const std::string& what)
      : Error(invariant + ": " + what), invariant_(std::move(invariant)) {}
  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

}  // namespace fene

#endif  // FENE_ERRORS_HPP_
