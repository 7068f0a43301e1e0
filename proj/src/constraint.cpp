#include "gdi/constraint.hpp"

#include "gdi/error.hpp"

namespace gdi {

Subconstraint& Subconstraint::add(LabelCondition c) {
  labels_.push_back(c);
  return *this;
}

Subconstraint& Subconstraint::add(PropertyCondition c) {
  props_.push_back(std::move(c));
  return *this;
}

Constraint& Constraint::add(Subconstraint s) {
  subs_.push_back(std::move(s));
  return *this;
}

bool Constraint::is_stale(const Catalog& catalog) const {
  for (const auto& s : subs_) {
    for (const auto& c : s.label_conditions()) {
      if (!catalog.contains(c.label)) return true;
    }
    for (const auto& c : s.property_conditions()) {
      if (!catalog.contains(c.ptype)) return true;
    }
  }
  return false;
}

bool compare(const Value& lhs, CompareOp op, const Value& rhs) {
  const auto c = compare_values(lhs, rhs);
  switch (op) {
    case CompareOp::eq: return c == 0;
    case CompareOp::ne: return c != 0;
    case CompareOp::lt: return c < 0;
    case CompareOp::le: return c <= 0;
    case CompareOp::gt: return c > 0;
    case CompareOp::ge: return c >= 0;
  }
  return false;
}

bool Constraint::evaluate(const AttributeView& object, const Catalog& catalog) const {
  if (is_stale(catalog)) throw Error(Errc::invalid_argument, "constraint refers to removed metadata");
  for (const auto& s : subs_) {
    for (const auto& c : s.property_conditions()) {
      if (datatype_of(c.value) != catalog.info(c.ptype).datatype) {
        throw Error(Errc::type_mismatch, "condition value does not match property type '" +
                                             catalog.info(c.ptype).name + "'");
      }
    }
  }
  if (subs_.empty()) return true;
  for (const auto& s : subs_) {
    bool all = true;
    for (const auto& c : s.label_conditions()) {
      if (object.has_label(c.label) != (c.op == LabelOp::has)) {
        all = false;
        break;
      }
    }
    if (!all) continue;
    for (const auto& c : s.property_conditions()) {
      bool any = false;
      for (const auto& v : object.property_values(c.ptype)) {
        if (compare(v, c.op, c.value)) {
          any = true;
          break;
        }
      }
      if (!any) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

}  // namespace gdi
