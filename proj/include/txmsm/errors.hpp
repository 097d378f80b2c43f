#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace txmsm {

/// Input errors map to CLI exit status 2, numerical failures to 3.
enum class ErrorCategory { input, numerical };

class Error : public std::runtime_error {
  public:
    Error(ErrorCategory category, std::string code, const std::string &message);

    /// Short machine-readable name, e.g. "MissingColumn" or "MonotoneLikelihood".
    const std::string &code() const noexcept { return code_; }
    ErrorCategory category() const noexcept { return category_; }

  private:
    ErrorCategory category_;
    std::string code_;
};

class InputError : public Error {
  public:
    InputError(std::string code, const std::string &message)
        : Error(ErrorCategory::input, std::move(code), message) {}
};

class NumericalError : public Error {
  public:
    NumericalError(std::string code, const std::string &message)
        : Error(ErrorCategory::numerical, std::move(code), message) {}
};

/// Schema violation in a cohort table; names the subject and the 1-based row
/// ordinal within the input.
class CohortError : public InputError {
  public:
    CohortError(std::string code, std::string pin, std::size_t row, const std::string &detail);

    const std::string &pin() const noexcept { return pin_; }
    std::size_t row() const noexcept { return row_; }

  private:
    std::string pin_;
    std::size_t row_;
};

} // namespace txmsm
