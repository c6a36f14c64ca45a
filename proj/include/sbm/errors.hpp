#pragma once

#include <stdexcept>
#include <string>

namespace sbm {

// Parameter outside a family's natural domain, or a rate <= 0 where one is required.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Observation outside the support of the emission law.
struct SupportError : std::domain_error {
  using std::domain_error::domain_error;
};

// Mean value outside psi'(interior of the natural domain).
struct RangeError : std::range_error {
  using std::range_error::range_error;
};

// Input too large for an exhaustive routine, or mismatched dimensions.
struct SizeError : std::length_error {
  using std::length_error::length_error;
};

struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UnsupportedDesignError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace sbm
