#pragma once

// Byte image of vertex and edge holders as stored across blocks.
//
// Offset  Size  Field
//   0      4    magic (kVertexMagic / kEdgeMagic; 0 once deleted)
//   4      4    incarnation the object was created under
//   8      4    used bytes of the image
//  12      4    block count n
//  16      4    app-id length
//  20      4    lightweight edge count
//  24      4    entry section length (including the end marker)
//  28      4    flags (bit 0: directed edge holder)
//  32      8    origin vertex (edge holders)
//  40      8    target vertex (edge holders)
//  48   8(n-1)  addresses of blocks 1..n-1
//   .      .    app id, padded to 8
//   .   24 each lightweight edges {neighbor, edge holder, label, flags}
//   .      .    entries {marker u32, length u32, payload padded to 4}, closed
//               by marker kEntryEnd
//
// Block i holds image bytes [i*B, (i+1)*B). The block list starts inside the
// primary block, and every address lies in a block fetched before it is
// needed, so the image can be read front to back.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gdi/block_pool.hpp"
#include "gdi/catalog.hpp"
#include "gdi/global_ref.hpp"

namespace gdi {

inline constexpr std::uint32_t kVertexMagic = 0x58545256;  // "VRTX"
inline constexpr std::uint32_t kEdgeMagic = 0x45474445;    // "EDGE"
inline constexpr std::size_t kHeaderBytes = 48;
inline constexpr std::size_t kLightEdgeBytes = 24;
inline constexpr std::size_t kMaxAppIdBytes = 256;

// Orientation of an edge as seen from the vertex storing the entry.
enum Orientation : std::uint8_t {
  kOutgoing = 1,
  kIncoming = 2,
  kUndirected = 4,
};
using OrientationMask = std::uint8_t;
inline constexpr OrientationMask kAnyOrientation = kOutgoing | kIncoming | kUndirected;

inline Orientation mirror_of(Orientation o) {
  return o == kOutgoing ? kIncoming : o == kIncoming ? kOutgoing : kUndirected;
}

struct LightEdge {
  GlobalRef neighbor;
  GlobalRef holder;  // edge holder once escalated, null for lightweight edges
  std::uint32_t label = 0;  // 0: none; always 0 once escalated
  Orientation orientation = kOutgoing;
  bool tombstone = false;

  bool heavy() const { return !holder.is_null(); }
  friend bool operator==(const LightEdge&, const LightEdge&) = default;
};

struct PropertyEntry {
  std::uint32_t marker = kEntryEmpty;
  std::vector<std::byte> payload;
  friend bool operator==(const PropertyEntry&, const PropertyEntry&) = default;
};

enum class ObjectKind : std::uint8_t { vertex, edge };

struct ObjectImage {
  ObjectKind kind = ObjectKind::vertex;
  std::uint32_t incarnation = 0;
  std::vector<GlobalRef> blocks;  // blocks[0] is the primary block
  std::vector<std::byte> app_id;
  std::vector<LightEdge> edges;
  GlobalRef origin;
  GlobalRef target;
  bool directed = false;
  std::vector<PropertyEntry> entries;  // marker kEntryEmpty marks removed entries

  friend bool operator==(const ObjectImage&, const ObjectImage&) = default;
};

std::size_t image_bytes(const ObjectImage& image, std::size_t block_count);
std::uint32_t blocks_needed(const ObjectImage& image, std::uint32_t block_size);

// image.blocks.size() must be >= blocks_needed(). Returns exactly
// blocks.size() * block_size bytes.
std::vector<std::byte> serialize(const ObjectImage& image, std::uint32_t block_size);
ObjectImage parse(std::span<const std::byte> bytes);

// Reads the whole image rooted at primary. Returns nullopt-like empty vector
// when the primary block does not carry a holder header.
std::vector<std::byte> fetch_image(const BlockPool& pool, GlobalRef primary);

std::uint32_t peek_magic(std::span<const std::byte> bytes);
std::uint32_t peek_incarnation(std::span<const std::byte> bytes);

// Drops tombstoned edges and empty entries. Returns true if anything changed.
bool compact(ObjectImage& image);

std::vector<std::byte> label_payload(Label label);
Label label_of(const PropertyEntry& entry);

}  // namespace gdi
