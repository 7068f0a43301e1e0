#include "gdi/layout.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "gdi/error.hpp"

namespace gdi {

namespace {

std::size_t pad(std::size_t n, std::size_t to) { return (n + to - 1) / to * to; }

std::size_t entries_bytes(const ObjectImage& image) {
  std::size_t n = 8;  // end marker
  for (const auto& e : image.entries) n += 8 + pad(e.payload.size(), 4);
  return n;
}

class Writer {
 public:
  explicit Writer(std::vector<std::byte>& out) : out_(out) {}
  template <typename T>
  void put(std::size_t at, T v) {
    std::memcpy(out_.data() + at, &v, sizeof(T));
  }
  void put_bytes(std::size_t at, std::span<const std::byte> b) {
    if (!b.empty()) std::memcpy(out_.data() + at, b.data(), b.size());
  }

 private:
  std::vector<std::byte>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}
  template <typename T>
  T get(std::size_t at) const {
    if (at + sizeof(T) > in_.size()) throw Error(Errc::bounds, "holder image truncated");
    T v;
    std::memcpy(&v, in_.data() + at, sizeof(T));
    return v;
  }
  std::span<const std::byte> bytes(std::size_t at, std::size_t n) const {
    if (at + n > in_.size()) throw Error(Errc::bounds, "holder image truncated");
    return in_.subspan(at, n);
  }

 private:
  std::span<const std::byte> in_;
};

}  // namespace

std::size_t image_bytes(const ObjectImage& image, std::size_t block_count) {
  return kHeaderBytes + 8 * (block_count > 0 ? block_count - 1 : 0) + pad(image.app_id.size(), 8) +
         kLightEdgeBytes * image.edges.size() + entries_bytes(image);
}

std::uint32_t blocks_needed(const ObjectImage& image, std::uint32_t block_size) {
  std::size_t n = 1;
  while (image_bytes(image, n) > n * block_size) ++n;
  return static_cast<std::uint32_t>(n);
}

std::vector<std::byte> serialize(const ObjectImage& image, std::uint32_t block_size) {
  const auto n = image.blocks.size();
  const auto used = image_bytes(image, n);
  if (n == 0 || used > n * block_size) {
    throw std::logic_error("holder image does not fit its blocks");
  }
  std::vector<std::byte> out(n * block_size);
  Writer w(out);
  w.put<std::uint32_t>(0, image.kind == ObjectKind::vertex ? kVertexMagic : kEdgeMagic);
  w.put<std::uint32_t>(4, image.incarnation);
  w.put<std::uint32_t>(8, static_cast<std::uint32_t>(used));
  w.put<std::uint32_t>(12, static_cast<std::uint32_t>(n));
  w.put<std::uint32_t>(16, static_cast<std::uint32_t>(image.app_id.size()));
  w.put<std::uint32_t>(20, static_cast<std::uint32_t>(image.edges.size()));
  w.put<std::uint32_t>(24, static_cast<std::uint32_t>(entries_bytes(image)));
  w.put<std::uint32_t>(28, image.directed ? 1u : 0u);
  w.put<std::uint64_t>(32, image.origin.bits());
  w.put<std::uint64_t>(40, image.target.bits());

  std::size_t at = kHeaderBytes;
  for (std::size_t i = 1; i < n; ++i, at += 8) w.put<std::uint64_t>(at, image.blocks[i].bits());
  w.put_bytes(at, image.app_id);
  at += pad(image.app_id.size(), 8);
  for (const auto& e : image.edges) {
    w.put<std::uint64_t>(at, e.neighbor.bits());
    w.put<std::uint64_t>(at + 8, e.holder.bits());
    w.put<std::uint32_t>(at + 16, e.label);
    w.put<std::uint32_t>(at + 20, std::uint32_t{e.orientation} | (e.tombstone ? 0x100u : 0u));
    at += kLightEdgeBytes;
  }
  for (const auto& e : image.entries) {
    w.put<std::uint32_t>(at, e.marker);
    w.put<std::uint32_t>(at + 4, static_cast<std::uint32_t>(e.payload.size()));
    w.put_bytes(at + 8, e.payload);
    at += 8 + pad(e.payload.size(), 4);
  }
  w.put<std::uint32_t>(at, kEntryEnd);
  w.put<std::uint32_t>(at + 4, 0);
  return out;
}

std::uint32_t peek_magic(std::span<const std::byte> bytes) { return Reader(bytes).get<std::uint32_t>(0); }

std::uint32_t peek_incarnation(std::span<const std::byte> bytes) { return Reader(bytes).get<std::uint32_t>(4); }

ObjectImage parse(std::span<const std::byte> bytes) {
  Reader r(bytes);
  ObjectImage image;
  const auto magic = r.get<std::uint32_t>(0);
  if (magic == kVertexMagic) {
    image.kind = ObjectKind::vertex;
  } else if (magic == kEdgeMagic) {
    image.kind = ObjectKind::edge;
  } else {
    throw Error(Errc::stale, "block does not hold a live vertex or edge");
  }
  image.incarnation = r.get<std::uint32_t>(4);
  const auto n = r.get<std::uint32_t>(12);
  const auto app_len = r.get<std::uint32_t>(16);
  const auto edge_count = r.get<std::uint32_t>(20);
  const auto entry_len = r.get<std::uint32_t>(24);
  image.directed = (r.get<std::uint32_t>(28) & 1u) != 0;
  image.origin = GlobalRef::from_bits(r.get<std::uint64_t>(32));
  image.target = GlobalRef::from_bits(r.get<std::uint64_t>(40));
  if (n == 0 || app_len > kMaxAppIdBytes) throw Error(Errc::bounds, "corrupt holder header");

  std::size_t at = kHeaderBytes;
  image.blocks.reserve(n);
  image.blocks.push_back(kNullRef);  // primary is implied by the caller's ref
  for (std::uint32_t i = 1; i < n; ++i, at += 8) {
    image.blocks.push_back(GlobalRef::from_bits(r.get<std::uint64_t>(at)));
  }
  const auto app = r.bytes(at, app_len);
  image.app_id.assign(app.begin(), app.end());
  at += pad(app_len, 8);
  image.edges.reserve(edge_count);
  for (std::uint32_t i = 0; i < edge_count; ++i, at += kLightEdgeBytes) {
    LightEdge e;
    e.neighbor = GlobalRef::from_bits(r.get<std::uint64_t>(at));
    e.holder = GlobalRef::from_bits(r.get<std::uint64_t>(at + 8));
    e.label = r.get<std::uint32_t>(at + 16);
    const auto flags = r.get<std::uint32_t>(at + 20);
    e.orientation = static_cast<Orientation>(flags & 0x7u);
    e.tombstone = (flags & 0x100u) != 0;
    image.edges.push_back(e);
  }
  const auto entries_end = at + entry_len;
  for (;;) {
    if (at + 8 > entries_end) throw Error(Errc::bounds, "entry sequence lacks its end marker");
    const auto marker = r.get<std::uint32_t>(at);
    const auto len = r.get<std::uint32_t>(at + 4);
    if (marker == kEntryEnd) break;
    PropertyEntry e;
    e.marker = marker;
    const auto payload = r.bytes(at + 8, len);
    e.payload.assign(payload.begin(), payload.end());
    image.entries.push_back(std::move(e));
    at += 8 + pad(len, 4);
  }
  return image;
}

std::vector<std::byte> fetch_image(const BlockPool& pool, GlobalRef primary) {
  const std::size_t bs = pool.block_size();
  std::vector<std::byte> bytes(bs);
  pool.read(primary, 0, bytes);
  const auto magic = peek_magic(bytes);
  if (magic != kVertexMagic && magic != kEdgeMagic) return {};
  const auto used = Reader(bytes).get<std::uint32_t>(8);
  const auto n = Reader(bytes).get<std::uint32_t>(12);
  if (n == 0 || used > std::size_t{n} * bs || kHeaderBytes + 8 * (std::size_t{n} - 1) > used) {
    throw Error(Errc::bounds, "corrupt holder header at " + primary.to_string());
  }
  bytes.resize(std::size_t{n} * bs);
  for (std::uint32_t i = 1; i < n; ++i) {
    const std::size_t addr_at = kHeaderBytes + 8 * (std::size_t{i} - 1);
    if (addr_at + 8 > std::size_t{i} * bs) throw std::logic_error("block list outruns fetched blocks");
    std::uint64_t bits;
    std::memcpy(&bits, bytes.data() + addr_at, 8);
    const std::size_t begin = std::size_t{i} * bs;
    const std::size_t len = std::min<std::size_t>(bs, used > begin ? used - begin : 0);
    if (len > 0) pool.read(GlobalRef::from_bits(bits), 0, std::span(bytes).subspan(begin, len));
  }
  return bytes;
}

bool compact(ObjectImage& image) {
  const auto edges_before = image.edges.size();
  const auto entries_before = image.entries.size();
  std::erase_if(image.edges, [](const LightEdge& e) { return e.tombstone; });
  std::erase_if(image.entries, [](const PropertyEntry& e) { return e.marker == kEntryEmpty; });
  return edges_before != image.edges.size() || entries_before != image.entries.size();
}

std::vector<std::byte> label_payload(Label label) {
  std::vector<std::byte> out(4);
  std::memcpy(out.data(), &label.id, 4);
  return out;
}

Label label_of(const PropertyEntry& entry) {
  if (entry.marker != kEntryLabel || entry.payload.size() != 4) {
    throw std::logic_error("entry is not a label entry");
  }
  Label l;
  std::memcpy(&l.id, entry.payload.data(), 4);
  return l;
}

}  // namespace gdi
