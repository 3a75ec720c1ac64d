#pragma once

#include <stdexcept>
#include <string>

namespace sepkrig {

/// Base class of every error raised by the library. The category maps onto
/// the CLI exit status: usage 1, data 2, numerical 3.
class Error : public std::runtime_error {
 public:
  enum class Category { usage = 1, data = 2, numerical = 3 };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  Category category_;
};

struct InvalidInputError : Error {
  explicit InvalidInputError(const std::string& what)
      : Error(Category::data, "invalid input: " + what) {}
};

struct ImputationError : Error {
  explicit ImputationError(const std::string& what)
      : Error(Category::data, "imputation: " + what) {}
};

struct InsufficientDataError : Error {
  explicit InsufficientDataError(const std::string& what)
      : Error(Category::data, "insufficient data: " + what) {}
};

struct DegenerateSensorError : Error {
  explicit DegenerateSensorError(const std::string& what)
      : Error(Category::data, "degenerate sensor: " + what) {}
};

struct ParameterError : Error {
  explicit ParameterError(const std::string& what)
      : Error(Category::data, "parameter: " + what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what)
      : Error(Category::numerical, "numerical: " + what) {}
};

struct SizeGuardError : Error {
  explicit SizeGuardError(const std::string& what)
      : Error(Category::numerical, "size guard: " + what) {}
};

/// Raised when a model/horizon combination has no supported variance rule.
struct CapabilityError : Error {
  explicit CapabilityError(const std::string& what)
      : Error(Category::numerical, "unsupported: " + what) {}
};

struct AssemblyError : Error {
  explicit AssemblyError(const std::string& what)
      : Error(Category::data, "assembly: " + what) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& what)
      : Error(Category::usage, what) {}
};

}  // namespace sepkrig
