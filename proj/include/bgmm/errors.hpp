#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace bgmm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failures. The CLI maps these to exit code 3.

class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, std::size_t observation)
      : Error(what), observation_(observation) {}
  std::size_t observation() const { return observation_; }

 private:
  std::size_t observation_;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate)
      : Error(what), last_iterate_(std::move(last_iterate)) {}
  const Eigen::VectorXd& last_iterate() const { return last_iterate_; }

 private:
  Eigen::VectorXd last_iterate_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Emrich-Piedmonte target correlation outside the Frechet bounds of a mean pair.
class FeasibilityError : public Error {
 public:
  FeasibilityError(const std::string& what, std::size_t subject, std::size_t first,
                   std::size_t second)
      : Error(what), subject_(subject), first_(first), second_(second) {}
  std::size_t subject() const { return subject_; }
  std::size_t first() const { return first_; }
  std::size_t second() const { return second_; }

 private:
  std::size_t subject_, first_, second_;
};

// User / configuration failures. The CLI maps these to exit code 2.

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class BudgetError : public Error {
 public:
  BudgetError(const std::string& what, std::size_t dimension)
      : Error(what), dimension_(dimension) {}
  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bgmm
