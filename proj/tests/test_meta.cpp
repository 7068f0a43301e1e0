#include <cmath>
#include <limits>

#include "doctest.h"
#include "gdi/catalog.hpp"
#include "gdi/error.hpp"

using namespace gdi;

TEST_CASE("value encode and decode round trip") {
  const std::vector<Value> values = {u64_value(7), i64_value(-3), f64_value(2.5), utf8_value("hello"),
                                     std::vector<std::byte>{std::byte{1}, std::byte{2}},
                                     std::vector<std::uint64_t>{1, 2, 3}};
  for (const auto& v : values) {
    auto back = decode(datatype_of(v), encode(v));
    CHECK(same_value(v, back));
  }
  CHECK_THROWS_AS(decode(Datatype::u64, std::vector<std::byte>(3)), Error);
}

TEST_CASE("value ordering") {
  CHECK(compare_values(u64_value(1), u64_value(2)) < 0);
  CHECK(compare_values(i64_value(-5), i64_value(3)) < 0);
  CHECK(compare_values(f64_value(-1.0), f64_value(0.5)) < 0);
  CHECK(compare_values(f64_value(-0.0), f64_value(0.0)) < 0);
  CHECK(compare_values(f64_value(1e300), f64_value(std::numeric_limits<double>::infinity())) < 0);
  CHECK(compare_values(utf8_value("abc"), utf8_value("abd")) < 0);
  CHECK(compare_values(Value(std::vector<std::uint64_t>{1}), Value(std::vector<std::uint64_t>{1, 0})) < 0);
  CHECK(compare_values(u64_value(4), u64_value(4)) == 0);
  CHECK_THROWS_AS(compare_values(u64_value(1), i64_value(1)), Error);
}

TEST_CASE("resizing pads or truncates") {
  Value v = std::vector<std::uint64_t>{1, 2};
  auto padded = resized(v, 3, u64_value(9));
  CHECK(std::get<std::vector<std::uint64_t>>(padded) == std::vector<std::uint64_t>{1, 2, 9});
  auto cut = resized(v, 1, u64_value(9));
  CHECK(std::get<std::vector<std::uint64_t>>(cut) == std::vector<std::uint64_t>{1});
}

TEST_CASE("catalog ids and names") {
  Catalog c;
  auto person = c.add_label("Person");
  CHECK(person.id == 3);
  auto car = c.add_label("Car");
  CHECK(car.id != person.id);
  CHECK_THROWS_AS(c.add_label("Person"), Error);
  CHECK(c.find_label("Car") == car);
  CHECK(c.info(car).name == "Car");
  auto age = c.add_property_type({0, "age", EntityKind::single, Datatype::u64, SizeKind::fixed, 1});
  CHECK(age.id == 5);
  CHECK(c.is_label_id(person.id));
  CHECK_FALSE(c.is_label_id(age.id));
  CHECK_NOTHROW(c.add_property_type({0, "fname", EntityKind::single, Datatype::utf8, SizeKind::max, 64}));
  CHECK_THROWS_AS(c.add_property_type({0, "bad", EntityKind::single, Datatype::u64, SizeKind::fixed, 0}), Error);
  c.remove_label(car);
  CHECK_FALSE(c.find_label("Car").has_value());
  CHECK_THROWS_AS(c.remove_label(car), Error);
  auto again = c.add_label("Car");
  CHECK(again.id > age.id);
  CHECK(c.consistent());
}

TEST_CASE("value checks against property types") {
  Catalog c;
  auto vec = c.add_property_type({0, "vec", EntityKind::single, Datatype::f64, SizeKind::fixed, 2});
  auto name = c.add_property_type({0, "name", EntityKind::single, Datatype::utf8, SizeKind::max, 4});
  CHECK_NOTHROW(c.check_value(vec, Value(std::vector<double>{1, 2})));
  CHECK_THROWS_AS(c.check_value(vec, Value(std::vector<double>{1})), Error);
  CHECK_THROWS_AS(c.check_value(vec, u64_value(1)), Error);
  CHECK_NOTHROW(c.check_value(name, utf8_value("abcd")));
  CHECK_THROWS_AS(c.check_value(name, utf8_value("abcde")), Error);
}

TEST_CASE("identical mutation sequences serialize identically") {
  Catalog a, b;
  for (auto* c : {&a, &b}) {
    c->add_label("A");
    auto x = c->add_label("B");
    c->add_property_type({0, "p", EntityKind::multi, Datatype::i64, SizeKind::none, 0});
    c->remove_label(x);
  }
  CHECK(a.serialize() == b.serialize());
  a.add_label("C");
  CHECK(a.serialize() != b.serialize());
}
