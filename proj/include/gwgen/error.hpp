#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gwgen {

/// Malformed arguments: non-finite values, broken invariants, bad shapes.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// A graph that should be connected is not. The caller usually retries with a
/// larger neighborhood.
class DisconnectedGraph : public std::runtime_error {
 public:
  DisconnectedGraph(const std::string& what, std::size_t components)
      : std::runtime_error(what), components_(components) {}
  std::size_t component_count() const noexcept { return components_; }

 private:
  std::size_t components_;
};

/// NaN/Inf showed up inside an iterative solver.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace gwgen
