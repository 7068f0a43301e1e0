#include "gdi/error.hpp"

namespace gdi {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::bounds: return "bounds";
    case Errc::alignment: return "alignment";
    case Errc::resource_exhausted: return "resource_exhausted";
    case Errc::not_found: return "not_found";
    case Errc::duplicate: return "duplicate";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::lock_busy: return "lock_busy";
    case Errc::stale: return "stale";
    case Errc::wrong_mode: return "wrong_mode";
    case Errc::transaction_failed: return "transaction_failed";
    case Errc::type_mismatch: return "type_mismatch";
    case Errc::collective_timeout: return "collective_timeout";
    case Errc::collective_mismatch: return "collective_mismatch";
    case Errc::io: return "io";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

bool Error::transaction_critical() const noexcept {
  switch (code_) {
    case Errc::lock_busy:
    case Errc::stale:
    case Errc::resource_exhausted:
    case Errc::duplicate:
    case Errc::transaction_failed:
      return true;
    default:
      return false;
  }
}

}  // namespace gdi
