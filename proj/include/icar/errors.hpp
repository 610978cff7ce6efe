#pragma once

#include <stdexcept>
#include <string>

namespace icar {

/// Malformed input file (adjacency, matrix CSV, data CSV). Message carries
/// file name plus line/column where known.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structurally invalid input: disconnected graph, rank-deficient design,
/// mismatched dimensions, bad flag combinations.
class InvalidInputError : public std::runtime_error {
 public:
  explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: eigensolver breakdown, singular system, degenerate
/// prior bracket, quadrature that did not converge within budget.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace icar
