#ifndef KSHC_ERRORS_HPP
#define KSHC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kshc {

/// Parameter or precondition violation; names the offending field.
class InvalidArgument : public std::runtime_error {
 public:
  InvalidArgument(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Runtime numerical failure (divergence, lost definiteness, non-finite state).
class NumericsError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kshc

#endif
