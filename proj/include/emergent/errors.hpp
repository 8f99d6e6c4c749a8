#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace emergent {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(std::vector<std::string> roles);
  const std::vector<std::string>& roles() const noexcept { return roles_; }

 private:
  std::vector<std::string> roles_;
};

class ProblemTooLargeError : public Error {
 public:
  using Error::Error;
};

class MalformedStreamError : public Error {
 public:
  using Error::Error;
};

class PastEventError : public Error {
 public:
  using Error::Error;
};

class UnknownRecipientError : public Error {
 public:
  using Error::Error;
};

class NoTemplateError : public Error {
 public:
  using Error::Error;
};

class NotInEnvironmentError : public Error {
 public:
  using Error::Error;
};

class InvalidRoleError : public Error {
 public:
  InvalidRoleError(const std::string& role, std::vector<std::string> codes);
  const std::vector<std::string>& codes() const noexcept { return codes_; }

 private:
  std::vector<std::string> codes_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Collects every unresolved reference found while cross-validating a scenario.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

}  // namespace emergent
