#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mmt {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Degenerate geometry: undefined angle, empty region, bad rectangle.
class GeometryError : public Error {
  public:
    using Error::Error;
};

/// Malformed QP (dimension mismatch, asymmetric or indefinite P, l > u).
class QpError : public Error {
  public:
    using Error::Error;
};

/// A planner found no feasible configuration.
class InfeasibleError : public Error {
  public:
    using Error::Error;
};

/// Grasp point outside the manipulator workspace.
class UnreachableError : public Error {
  public:
    using Error::Error;
};

/// Scenario parse or semantic validation failure. Carries every finding.
class ScenarioError : public Error {
  public:
    explicit ScenarioError(std::vector<std::string> problems);

    [[nodiscard]] const std::vector<std::string>& problems() const noexcept { return problems_; }

  private:
    std::vector<std::string> problems_;
};

}  // namespace mmt
