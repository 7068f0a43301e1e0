#pragma once

#include <stdexcept>
#include <string>

namespace gdi {

enum class Errc {
  bounds,
  alignment,
  resource_exhausted,
  not_found,
  duplicate,
  invalid_argument,
  lock_busy,
  stale,
  wrong_mode,
  transaction_failed,
  type_mismatch,
  collective_timeout,
  collective_mismatch,
  io,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

  // A transaction-critical error guarantees that the enclosing transaction
  // can only end aborted.
  bool transaction_critical() const noexcept;

 private:
  Errc code_;
};

}  // namespace gdi
