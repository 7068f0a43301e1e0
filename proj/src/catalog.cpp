#include "gdi/catalog.hpp"

#include <sstream>

#include "gdi/error.hpp"

namespace gdi {

Label Catalog::add_label(const std::string& name) {
  if (name.empty()) throw Error(Errc::invalid_argument, "label name is empty");
  if (label_by_name_.count(name) || ptype_by_name_.count(name)) {
    throw Error(Errc::duplicate, "metadata name '" + name + "' already exists");
  }
  auto it = labels_.insert(labels_.end(), LabelInfo{next_id_++, name});
  label_by_name_.emplace(name, it);
  label_by_id_.emplace(it->id, it);
  return Label{it->id};
}

void Catalog::remove_label(Label label) {
  auto found = label_by_id_.find(label.id);
  if (found == label_by_id_.end()) throw Error(Errc::not_found, "unknown label " + std::to_string(label.id));
  auto it = found->second;
  label_by_name_.erase(it->name);
  label_by_id_.erase(found);
  labels_.erase(it);
}

std::optional<Label> Catalog::find_label(std::string_view name) const {
  auto it = label_by_name_.find(std::string(name));
  if (it == label_by_name_.end()) return std::nullopt;
  return Label{it->second->id};
}

const LabelInfo& Catalog::info(Label label) const {
  auto it = label_by_id_.find(label.id);
  if (it == label_by_id_.end()) throw Error(Errc::not_found, "unknown label " + std::to_string(label.id));
  return *it->second;
}

void Catalog::check_limits(SizeKind size_kind, std::uint32_t size_limit) {
  if (size_kind != SizeKind::none && size_limit == 0) {
    throw Error(Errc::invalid_argument, "bounded size kinds need a positive limit");
  }
}

PropertyType Catalog::add_property_type(const PropertyTypeInfo& spec) {
  if (spec.name.empty()) throw Error(Errc::invalid_argument, "property type name is empty");
  if (label_by_name_.count(spec.name) || ptype_by_name_.count(spec.name)) {
    throw Error(Errc::duplicate, "metadata name '" + spec.name + "' already exists");
  }
  check_limits(spec.size_kind, spec.size_limit);
  PropertyTypeInfo stored = spec;
  stored.id = next_id_++;
  auto it = ptypes_.insert(ptypes_.end(), stored);
  ptype_by_name_.emplace(it->name, it);
  ptype_by_id_.emplace(it->id, it);
  return PropertyType{it->id};
}

void Catalog::remove_property_type(PropertyType ptype) {
  auto found = ptype_by_id_.find(ptype.id);
  if (found == ptype_by_id_.end()) {
    throw Error(Errc::not_found, "unknown property type " + std::to_string(ptype.id));
  }
  auto it = found->second;
  ptype_by_name_.erase(it->name);
  ptype_by_id_.erase(found);
  ptypes_.erase(it);
}

void Catalog::update_property_type(PropertyType ptype, EntityKind entity, SizeKind size_kind,
                                   std::uint32_t size_limit) {
  check_limits(size_kind, size_limit);
  auto found = ptype_by_id_.find(ptype.id);
  if (found == ptype_by_id_.end()) {
    throw Error(Errc::not_found, "unknown property type " + std::to_string(ptype.id));
  }
  found->second->entity = entity;
  found->second->size_kind = size_kind;
  found->second->size_limit = size_limit;
}

std::optional<PropertyType> Catalog::find_property_type(std::string_view name) const {
  auto it = ptype_by_name_.find(std::string(name));
  if (it == ptype_by_name_.end()) return std::nullopt;
  return PropertyType{it->second->id};
}

const PropertyTypeInfo& Catalog::info(PropertyType ptype) const {
  auto it = ptype_by_id_.find(ptype.id);
  if (it == ptype_by_id_.end()) throw Error(Errc::not_found, "unknown property type " + std::to_string(ptype.id));
  return *it->second;
}

std::vector<Label> Catalog::labels() const {
  std::vector<Label> out;
  out.reserve(labels_.size());
  for (const auto& l : labels_) out.push_back(Label{l.id});
  return out;
}

std::vector<PropertyType> Catalog::property_types() const {
  std::vector<PropertyType> out;
  out.reserve(ptypes_.size());
  for (const auto& p : ptypes_) out.push_back(PropertyType{p.id});
  return out;
}

void Catalog::check_value(PropertyType ptype, const Value& value) const {
  const auto& pt = info(ptype);
  if (datatype_of(value) != pt.datatype) {
    throw Error(Errc::type_mismatch, "property '" + pt.name + "' expects " + to_string(pt.datatype) + ", got " +
                                         to_string(datatype_of(value)));
  }
  const auto n = element_count(value);
  if (pt.size_kind == SizeKind::fixed && n != pt.size_limit) {
    throw Error(Errc::invalid_argument, "property '" + pt.name + "' needs exactly " +
                                            std::to_string(pt.size_limit) + " elements, got " + std::to_string(n));
  }
  if (pt.size_kind == SizeKind::max && n > pt.size_limit) {
    throw Error(Errc::invalid_argument, "property '" + pt.name + "' allows at most " +
                                            std::to_string(pt.size_limit) + " elements, got " + std::to_string(n));
  }
}

std::string Catalog::serialize() const {
  std::ostringstream os;
  os << "next=" << next_id_ << '\n';
  for (const auto& l : labels_) os << "label " << l.id << ' ' << l.name << '\n';
  for (const auto& p : ptypes_) {
    os << "ptype " << p.id << ' ' << p.name << ' ' << to_string(p.entity) << ' ' << to_string(p.datatype) << ' '
       << to_string(p.size_kind) << ' ' << p.size_limit << '\n';
  }
  return os.str();
}

bool Catalog::consistent() const {
  if (labels_.size() != label_by_name_.size() || labels_.size() != label_by_id_.size()) return false;
  for (auto it = labels_.begin(); it != labels_.end(); ++it) {
    auto n = label_by_name_.find(it->name);
    auto i = label_by_id_.find(it->id);
    if (n == label_by_name_.end() || i == label_by_id_.end() || n->second != it || i->second != it) return false;
    if (it->id < kFirstUserId) return false;
  }
  if (ptypes_.size() != ptype_by_name_.size() || ptypes_.size() != ptype_by_id_.size()) return false;
  for (auto it = ptypes_.begin(); it != ptypes_.end(); ++it) {
    auto n = ptype_by_name_.find(it->name);
    auto i = ptype_by_id_.find(it->id);
    if (n == ptype_by_name_.end() || i == ptype_by_id_.end() || n->second != it || i->second != it) return false;
    if (it->id < kFirstUserId) return false;
  }
  return true;
}

}  // namespace gdi
