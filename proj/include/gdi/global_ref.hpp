#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

#include "gdi/rma.hpp"

namespace gdi {

// 64-bit global address of a block: rank in the high 16 bits, byte offset
// into that rank's data window in the low 48 bits.
class GlobalRef {
 public:
  static constexpr std::uint64_t kNullBits = ~std::uint64_t{0};
  static constexpr std::uint64_t kOffsetMask = (std::uint64_t{1} << 48) - 1;

  constexpr GlobalRef() = default;
  constexpr GlobalRef(rma::RankId rank, std::uint64_t offset)
      : bits_((std::uint64_t{rank} << 48) | (offset & kOffsetMask)) {}

  static constexpr GlobalRef from_bits(std::uint64_t bits) {
    GlobalRef r;
    r.bits_ = bits;
    return r;
  }
  static constexpr GlobalRef null() { return GlobalRef{}; }

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr rma::RankId rank() const { return static_cast<rma::RankId>(bits_ >> 48); }
  constexpr std::uint64_t offset() const { return bits_ & kOffsetMask; }
  constexpr bool is_null() const { return bits_ == kNullBits; }
  constexpr explicit operator bool() const { return !is_null(); }

  constexpr auto operator<=>(const GlobalRef&) const = default;

  std::string to_string() const;

 private:
  std::uint64_t bits_ = kNullBits;
};

inline constexpr GlobalRef kNullRef{};

}  // namespace gdi

template <>
struct std::hash<gdi::GlobalRef> {
  std::size_t operator()(const gdi::GlobalRef& r) const noexcept {
    return std::hash<std::uint64_t>{}(r.bits());
  }
};
