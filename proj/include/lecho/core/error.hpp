#pragma once

#include <stdexcept>
#include <string>

namespace lecho {

enum class Errc {
  invalid_argument,
  grid_too_coarse,
  static_kind_mismatch,
  out_of_range,
  insufficient_ensemble,
  unsupported_kind,
  tangent_overflow,
  duration_mismatch,
  unresolvable_packet,
  no_fit_window,
  linearization_invalid,
  schema_violation,
  precondition,
  io,
};

inline const char* to_string(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::grid_too_coarse: return "grid-too-coarse";
    case Errc::static_kind_mismatch: return "static-kind-mismatch";
    case Errc::out_of_range: return "out-of-range";
    case Errc::insufficient_ensemble: return "insufficient-ensemble";
    case Errc::unsupported_kind: return "unsupported-kind";
    case Errc::tangent_overflow: return "tangent-overflow";
    case Errc::duration_mismatch: return "duration-mismatch";
    case Errc::unresolvable_packet: return "unresolvable-packet";
    case Errc::no_fit_window: return "no-fit-window";
    case Errc::linearization_invalid: return "linearization-invalid";
    case Errc::schema_violation: return "schema-violation";
    case Errc::precondition: return "precondition";
    case Errc::io: return "io";
  }
  return "unknown";
}

/// Every recoverable failure in the library is reported as an Error carrying
/// a machine-checkable code next to the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lecho
