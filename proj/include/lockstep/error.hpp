#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace lockstep {

/// Shapes or lengths that do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf showed up in a loss, gradient or parameter vector.
class NumericFailure : public std::runtime_error {
 public:
  explicit NumericFailure(const std::string& what, std::optional<std::int64_t> step = std::nullopt)
      : std::runtime_error(step ? what + " (step " + std::to_string(*step) + ")" : what),
        detail_(what),
        step_(step) {}

  std::optional<std::int64_t> step() const { return step_; }
  const std::string& detail() const { return detail_; }

  /// Re-raise with the training step attached, keeping an existing one.
  NumericFailure at_step(std::int64_t step) const {
    return NumericFailure(detail_, step_ ? step_ : std::optional<std::int64_t>(step));
  }

 private:
  std::string detail_;
  std::optional<std::int64_t> step_;
};

/// Malformed input file. `field` names the offending header field or section.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Exact-mode coordinate audit refused because d exceeds the evaluation budget.
class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(std::size_t d, std::size_t d_max)
      : std::runtime_error("exact individual reward needs " + std::to_string(d) +
                           " loss evaluations but d_max is " + std::to_string(d_max)),
        d_(d),
        d_max_(d_max) {}

  std::size_t d() const { return d_; }
  std::size_t d_max() const { return d_max_; }

 private:
  std::size_t d_;
  std::size_t d_max_;
};

}  // namespace lockstep
