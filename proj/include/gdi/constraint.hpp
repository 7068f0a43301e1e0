#pragma once

// Filters over labels and properties in disjunctive normal form.

#include <vector>

#include "gdi/catalog.hpp"
#include "gdi/value.hpp"

namespace gdi {

enum class LabelOp { has, has_not };
enum class CompareOp { eq, ne, lt, le, gt, ge };

struct LabelCondition {
  Label label;
  LabelOp op = LabelOp::has;
};

struct PropertyCondition {
  PropertyType ptype;
  CompareOp op = CompareOp::eq;
  Value value;
};

// Conjunction of conditions.
class Subconstraint {
 public:
  Subconstraint& add(LabelCondition c);
  Subconstraint& add(PropertyCondition c);
  Subconstraint& has(Label l) { return add(LabelCondition{l, LabelOp::has}); }
  Subconstraint& has_not(Label l) { return add(LabelCondition{l, LabelOp::has_not}); }
  Subconstraint& where(PropertyType p, CompareOp op, Value v) { return add(PropertyCondition{p, op, std::move(v)}); }

  const std::vector<LabelCondition>& label_conditions() const { return labels_; }
  const std::vector<PropertyCondition>& property_conditions() const { return props_; }

 private:
  std::vector<LabelCondition> labels_;
  std::vector<PropertyCondition> props_;
};

// What a constraint is evaluated against.
class AttributeView {
 public:
  virtual ~AttributeView() = default;
  virtual bool has_label(Label l) const = 0;
  virtual std::vector<Value> property_values(PropertyType p) const = 0;
};

// Disjunction of subconstraints. An empty constraint matches everything.
class Constraint {
 public:
  Constraint() = default;
  Constraint& add(Subconstraint s);
  bool empty() const { return subs_.empty(); }
  const std::vector<Subconstraint>& subconstraints() const { return subs_; }

  // True if a referenced label or property type is no longer in the catalog.
  bool is_stale(const Catalog& catalog) const;

  // Throws invalid_argument if stale and type_mismatch if a property value
  // has a different datatype than its property type.
  bool evaluate(const AttributeView& object, const Catalog& catalog) const;

 private:
  std::vector<Subconstraint> subs_;
};

bool compare(const Value& lhs, CompareOp op, const Value& rhs);

}  // namespace gdi
