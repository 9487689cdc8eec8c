#pragma once

#include <stdexcept>
#include <string>

namespace fpp {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (x <= 0, gamma = 1, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

// Volatility matrix is rank deficient beyond the pseudoinverse tolerance.
class SingularMarketError : public Error {
public:
  using Error::Error;
};

// Target sigma*pi lies outside the column space of sigma.
class NoExactSolutionError : public Error {
public:
  NoExactSolutionError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

class StrategyError : public Error {
public:
  StrategyError(const std::string& what, double t) : Error(what), t_(t) {}
  double time() const noexcept { return t_; }

private:
  double t_;
};

class InvalidExponentError : public Error {
public:
  using Error::Error;
};

// rho^T rho is singular in a factor-generated J specification.
class FactorDegeneracyError : public Error {
public:
  using Error::Error;
};

}  // namespace fpp
