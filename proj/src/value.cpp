#include "gdi/value.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "gdi/error.hpp"

namespace gdi {

namespace {

template <typename T>
std::strong_ordering compare_elems(const T& a, const T& b) {
  if constexpr (std::is_same_v<T, double>) {
    // IEEE totalOrder via the sign-flipped bit pattern.
    auto key = [](double d) {
      std::int64_t bits;
      std::memcpy(&bits, &d, 8);
      return bits ^ static_cast<std::int64_t>(static_cast<std::uint64_t>(bits >> 63) >> 1);
    };
    return key(a) <=> key(b);
  } else {
    return a <=> b;
  }
}

template <typename Seq>
std::strong_ordering compare_seq(const Seq& a, const Seq& b) {
  const auto n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (auto c = compare_elems(a[i], b[i]); c != 0) return c;
  }
  return a.size() <=> b.size();
}

}  // namespace

Datatype datatype_of(const Value& v) { return static_cast<Datatype>(v.index()); }

std::size_t element_count(const Value& v) {
  return std::visit([](const auto& seq) { return seq.size(); }, v);
}

std::size_t element_size(Datatype t) {
  switch (t) {
    case Datatype::u64:
    case Datatype::i64:
    case Datatype::f64:
      return 8;
    case Datatype::utf8:
    case Datatype::bytes:
      return 1;
  }
  return 1;
}

std::vector<std::byte> encode(const Value& v) {
  return std::visit(
      [](const auto& seq) {
        std::vector<std::byte> out(seq.size() * sizeof(seq[0]));
        if (!out.empty()) std::memcpy(out.data(), seq.data(), out.size());
        return out;
      },
      v);
}

Value decode(Datatype t, std::span<const std::byte> raw) {
  const auto es = element_size(t);
  if (raw.size() % es != 0) throw Error(Errc::invalid_argument, "property payload not a multiple of element size");
  auto fill = [&](auto seq) {
    seq.resize(raw.size() / es);
    if (!raw.empty()) std::memcpy(seq.data(), raw.data(), raw.size());
    return Value(std::move(seq));
  };
  switch (t) {
    case Datatype::u64: return fill(std::vector<std::uint64_t>{});
    case Datatype::i64: return fill(std::vector<std::int64_t>{});
    case Datatype::f64: return fill(std::vector<double>{});
    case Datatype::utf8: return fill(std::string{});
    case Datatype::bytes: return fill(std::vector<std::byte>{});
  }
  throw Error(Errc::invalid_argument, "unknown datatype");
}

std::strong_ordering compare_values(const Value& a, const Value& b) {
  if (a.index() != b.index()) throw Error(Errc::type_mismatch, "comparing values of different datatypes");
  return std::visit(
      [&](const auto& lhs) {
        using Seq = std::decay_t<decltype(lhs)>;
        return compare_seq(lhs, std::get<Seq>(b));
      },
      a);
}

bool same_value(const Value& a, const Value& b) { return a.index() == b.index() && encode(a) == encode(b); }

std::uint64_t as_u64(const Value& v) {
  const auto* seq = std::get_if<std::vector<std::uint64_t>>(&v);
  if (!seq) throw Error(Errc::type_mismatch, "value is not u64");
  if (seq->size() != 1) throw Error(Errc::invalid_argument, "value is not a scalar");
  return (*seq)[0];
}

double as_f64(const Value& v) {
  const auto* seq = std::get_if<std::vector<double>>(&v);
  if (!seq) throw Error(Errc::type_mismatch, "value is not f64");
  if (seq->size() != 1) throw Error(Errc::invalid_argument, "value is not a scalar");
  return (*seq)[0];
}

Value resized(const Value& v, std::size_t n, const Value& fill) {
  if (v.index() != fill.index()) throw Error(Errc::type_mismatch, "fill value has a different datatype");
  return std::visit(
      [&](const auto& seq) -> Value {
        using Seq = std::decay_t<decltype(seq)>;
        const auto& pad = std::get<Seq>(fill);
        Seq out = seq;
        if (out.size() > n) {
          out.resize(n);
        } else {
          if (pad.empty()) throw Error(Errc::invalid_argument, "fill value is empty");
          while (out.size() < n) out.push_back(pad[0]);
        }
        return out;
      },
      v);
}

const char* to_string(Datatype t) {
  switch (t) {
    case Datatype::u64: return "u64";
    case Datatype::i64: return "i64";
    case Datatype::f64: return "f64";
    case Datatype::utf8: return "utf8";
    case Datatype::bytes: return "bytes";
  }
  return "?";
}

const char* to_string(EntityKind k) { return k == EntityKind::single ? "single" : "multi"; }

const char* to_string(SizeKind k) {
  switch (k) {
    case SizeKind::none: return "none";
    case SizeKind::max: return "max";
    case SizeKind::fixed: return "fixed";
  }
  return "?";
}

Datatype datatype_from_string(std::string_view s) {
  for (auto t : {Datatype::u64, Datatype::i64, Datatype::f64, Datatype::utf8, Datatype::bytes}) {
    if (s == to_string(t)) return t;
  }
  throw Error(Errc::invalid_argument, "unknown datatype '" + std::string(s) + "'");
}

EntityKind entity_from_string(std::string_view s) {
  if (s == "single") return EntityKind::single;
  if (s == "multi") return EntityKind::multi;
  throw Error(Errc::invalid_argument, "unknown entity kind '" + std::string(s) + "'");
}

SizeKind size_kind_from_string(std::string_view s) {
  for (auto k : {SizeKind::none, SizeKind::max, SizeKind::fixed}) {
    if (s == to_string(k)) return k;
  }
  throw Error(Errc::invalid_argument, "unknown size kind '" + std::string(s) + "'");
}

std::string describe(const Value& v) {
  std::ostringstream os;
  std::visit(
      [&](const auto& seq) {
        using Seq = std::decay_t<decltype(seq)>;
        if constexpr (std::is_same_v<Seq, std::string>) {
          os << '"' << seq << '"';
        } else if constexpr (std::is_same_v<Seq, std::vector<std::byte>>) {
          os << "bytes[" << seq.size() << "]";
        } else {
          os << '[';
          for (std::size_t i = 0; i < seq.size(); ++i) os << (i ? "," : "") << seq[i];
          os << ']';
        }
      },
      v);
  return os.str();
}

}  // namespace gdi
