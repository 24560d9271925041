#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ordfa {

/// A log-density on an unconstrained space, with gradient, plus the mapping
/// to the named constrained quantities that are recorded as draws.
class Target {
 public:
  virtual ~Target() = default;

  virtual std::size_t dim() const = 0;

  /// Returns the log-density at x. When `grad` is non-empty it receives the
  /// gradient. Non-finite values signal a rejected point.
  virtual double log_density(std::span<const double> x, std::span<double> grad) const = 0;

  /// A sensible starting point for chains, or empty for the origin.
  virtual std::vector<double> initial_point() const { return {}; }

  virtual std::vector<std::string> output_names() const = 0;
  virtual void write_output(std::span<const double> x, std::span<double> out) const = 0;
};

}  // namespace ordfa
