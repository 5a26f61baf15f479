#pragma once

#include <stdexcept>
#include <string>

namespace ranklab {

/// Base of all library errors. The category decides the CLI exit code.
class Error : public std::runtime_error {
 public:
  enum class Category { usage = 2, io = 3, validation = 4, numerical = 5 };

  Error(Category category, const std::string& what) : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  Category category_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(Category::usage, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Category::io, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(Category::validation, what) {}
};

/// Non-convergence, precision loss, non-identification.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(Category::numerical, what) {}
};

}  // namespace ranklab
