#pragma once

// Graph metadata: labels and property types. Each rank holds a full
// replica; mutations are applied by collective calls on Database so every
// replica evolves identically.

#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gdi/value.hpp"

namespace gdi {

// Integer IDs 0, 1 and 2 are reserved by the property-entry encoding
// (empty, end of entries, label marker). Labels and property types share
// one ID space starting at kFirstUserId.
inline constexpr std::uint32_t kEntryEmpty = 0;
inline constexpr std::uint32_t kEntryEnd = 1;
inline constexpr std::uint32_t kEntryLabel = 2;
inline constexpr std::uint32_t kFirstUserId = 3;

struct Label {
  std::uint32_t id = 0;
  friend bool operator==(const Label&, const Label&) = default;
  friend auto operator<=>(const Label&, const Label&) = default;
};

struct PropertyType {
  std::uint32_t id = 0;
  friend bool operator==(const PropertyType&, const PropertyType&) = default;
  friend auto operator<=>(const PropertyType&, const PropertyType&) = default;
};

struct LabelInfo {
  std::uint32_t id = 0;
  std::string name;
};

struct PropertyTypeInfo {
  std::uint32_t id = 0;
  std::string name;
  EntityKind entity = EntityKind::single;
  Datatype datatype = Datatype::u64;
  SizeKind size_kind = SizeKind::none;
  std::uint32_t size_limit = 0;
};

class Catalog {
 public:
  Label add_label(const std::string& name);
  void remove_label(Label label);
  std::optional<Label> find_label(std::string_view name) const;
  const LabelInfo& info(Label label) const;
  bool contains(Label label) const { return label_by_id_.count(label.id) != 0; }

  PropertyType add_property_type(const PropertyTypeInfo& spec);
  void remove_property_type(PropertyType ptype);
  void update_property_type(PropertyType ptype, EntityKind entity, SizeKind size_kind, std::uint32_t size_limit);
  std::optional<PropertyType> find_property_type(std::string_view name) const;
  const PropertyTypeInfo& info(PropertyType ptype) const;
  bool contains(PropertyType ptype) const { return ptype_by_id_.count(ptype.id) != 0; }
  // True iff id names a label (as opposed to a property type or nothing).
  bool is_label_id(std::uint32_t id) const { return label_by_id_.count(id) != 0; }

  std::vector<Label> labels() const;
  std::vector<PropertyType> property_types() const;

  // Throws if value violates the type's datatype or size limits.
  void check_value(PropertyType ptype, const Value& value) const;
  static void check_limits(SizeKind size_kind, std::uint32_t size_limit);

  std::uint32_t next_id() const { return next_id_; }

  // Canonical text form; identical replicas serialize identically.
  std::string serialize() const;
  // Structural self-check: list and maps describe the same members.
  bool consistent() const;

 private:
  std::uint32_t next_id_ = kFirstUserId;
  std::list<LabelInfo> labels_;
  std::unordered_map<std::string, std::list<LabelInfo>::iterator> label_by_name_;
  std::unordered_map<std::uint32_t, std::list<LabelInfo>::iterator> label_by_id_;
  std::list<PropertyTypeInfo> ptypes_;
  std::unordered_map<std::string, std::list<PropertyTypeInfo>::iterator> ptype_by_name_;
  std::unordered_map<std::uint32_t, std::list<PropertyTypeInfo>::iterator> ptype_by_id_;
};

}  // namespace gdi
