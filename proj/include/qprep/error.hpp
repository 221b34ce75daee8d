#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qprep {

/// Failure categories raised by the library. The CLI maps the domain
/// categories to exit code 2 and everything else to exit code 1.
enum class Errc {
  invalid_argument,
  segment_grid_mismatch,
  non_pure_target,
  divergent_control,
  control_cap_exceeded,
  domain_error,
  residual_exceeded,
  gradient_check_failed,
};

constexpr std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::segment_grid_mismatch: return "SegmentGridMismatch";
    case Errc::non_pure_target: return "NonPureTarget";
    case Errc::divergent_control: return "DivergentControl";
    case Errc::control_cap_exceeded: return "ControlCapExceeded";
    case Errc::domain_error: return "DomainError";
    case Errc::residual_exceeded: return "ResidualExceeded";
    case Errc::gradient_check_failed: return "GradientCheckFailed";
  }
  return "Unknown";
}

/// True for errors caused by the physics of the request rather than by the
/// program (unreachable target, mixed target state, drive above the cap).
constexpr bool is_domain_error(Errc code) noexcept {
  return code == Errc::divergent_control || code == Errc::non_pure_target ||
         code == Errc::control_cap_exceeded || code == Errc::domain_error;
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(Errc::invalid_argument, message);
}

}  // namespace qprep
