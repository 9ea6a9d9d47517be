#pragma once

#include <stdexcept>
#include <string>

namespace bismut {

/// Invalid input: bad configuration, precondition violation, unknown model.
/// `field()` names the offending config field when one is known.
class ValidationError : public std::invalid_argument {
public:
  explicit ValidationError(const std::string& what, std::string field = {})
      : std::invalid_argument(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Numerical breakdown: too many non-finite paths, optimizer failure.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace bismut
