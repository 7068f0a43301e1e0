#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace gdi {

enum class Datatype : std::uint8_t { u64, i64, f64, utf8, bytes };
enum class EntityKind : std::uint8_t { single, multi };
enum class SizeKind : std::uint8_t { none, max, fixed };

// A property value is a sequence of elements of one datatype. Scalars are
// sequences of length one. Alternative order matches Datatype.
using Value = std::variant<std::vector<std::uint64_t>, std::vector<std::int64_t>, std::vector<double>,
                           std::string, std::vector<std::byte>>;

inline Value u64_value(std::uint64_t v) { return std::vector<std::uint64_t>{v}; }
inline Value i64_value(std::int64_t v) { return std::vector<std::int64_t>{v}; }
inline Value f64_value(double v) { return std::vector<double>{v}; }
inline Value utf8_value(std::string v) { return v; }

Datatype datatype_of(const Value& v);
std::size_t element_count(const Value& v);
std::size_t element_size(Datatype t);

std::vector<std::byte> encode(const Value& v);
Value decode(Datatype t, std::span<const std::byte> raw);

// Lexicographic over elements. Throws type_mismatch for differing datatypes.
std::strong_ordering compare_values(const Value& a, const Value& b);
// Bit-exact equality (distinguishes -0.0 from 0.0, NaN payloads).
bool same_value(const Value& a, const Value& b);

// Scalar accessors; throw type_mismatch / invalid_argument.
std::uint64_t as_u64(const Value& v);
double as_f64(const Value& v);

// Appends default elements (or truncates) to exactly n elements.
Value resized(const Value& v, std::size_t n, const Value& fill);

const char* to_string(Datatype t);
const char* to_string(EntityKind k);
const char* to_string(SizeKind k);
Datatype datatype_from_string(std::string_view s);
EntityKind entity_from_string(std::string_view s);
SizeKind size_kind_from_string(std::string_view s);

std::string describe(const Value& v);

}  // namespace gdi
