#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "snorm/partition.hpp"

using namespace snorm;

TEST_CASE("presets pool the documented axes") {
  CHECK(preset("BN").pooled == AxisSet{Axis::N, Axis::Y, Axis::X});
  CHECK(preset("LN").pooled == AxisSet{Axis::Y, Axis::X, Axis::C});
  CHECK(preset("neuron_wise").pooled == AxisSet{Axis::N});
  CHECK(preset("layer_batch").pooled == AxisSet{Axis::N, Axis::Y, Axis::X, Axis::C});
  CHECK(preset("sample_channel").pooled == AxisSet{Axis::Y, Axis::X});
  CHECK_THROWS_AS(preset("BA9"), ParamError);
}

TEST_CASE("BN preset on (2,1,1,3) gives 3 groups of 2") {
  GroupMap m = groups_of(preset("BN"), {2, 1, 1, 3});
  CHECK(m.group_count() == 3);
  CHECK(m.group_size() == 2);
  std::map<long, long> sizes;
  for (long id : m.materialize()) sizes[id]++;
  CHECK(sizes.size() == 3);
  for (auto& [id, sz] : sizes) CHECK(sz == 2);
}

TEST_CASE("LN preset on (2,1,1,3) gives 2 groups of 3") {
  GroupMap m = groups_of(preset("LN"), {2, 1, 1, 3});
  CHECK(m.group_count() == 2);
  CHECK(m.group_size() == 3);
}

TEST_CASE("empty pooled set makes every element its own group") {
  PartitionScheme s;  // pools nothing
  GroupMap m = groups_of(s, {2, 3, 2, 4});
  CHECK(m.group_count() == 48);
  CHECK(m.group_size() == 1);
  std::set<long> ids;
  for (long id : m.materialize()) ids.insert(id);
  CHECK(static_cast<long>(ids.size()) == 48);
}

TEST_CASE("elements share a group iff non-pooled coordinates agree") {
  GroupMap m = groups_of(preset("BN"), {2, 2, 2, 3});
  CHECK(m.group_of(0, 1, 1, 2) == m.group_of(1, 0, 0, 2));
  CHECK(m.group_of(0, 0, 0, 1) != m.group_of(0, 0, 0, 2));
}

TEST_CASE("group sizes always tile the tensor") {
  const Shape4 shapes[] = {{2, 1, 1, 3}, {4, 3, 5, 2}, {1, 1, 1, 7}};
  const char* names[] = {"BN", "LN", "neuron_wise", "layer_batch", "sample_channel"};
  for (const Shape4& sh : shapes) {
    for (const char* name : names) {
      GroupMap m = groups_of(preset(name), sh);
      CHECK(m.group_count() * m.group_size() == sh.count());
      std::map<long, long> sizes;
      for (long id : m.materialize()) {
        CHECK(id >= 0);
        CHECK(id < m.group_count());
        sizes[id]++;
      }
      CHECK(static_cast<long>(sizes.size()) == m.group_count());
      for (auto& [id, sz] : sizes) CHECK(sz == m.group_size());
    }
  }
}

TEST_CASE("BN and neuron_wise induce identical partitions when Y=X=1") {
  const Shape4 sh{5, 1, 1, 4};
  auto a = groups_of(preset("BN"), sh).materialize();
  auto b = groups_of(preset("neuron_wise"), sh).materialize();
  CHECK(a == b);
}

TEST_CASE("scheme parsing round-trips presets and explicit axis lists") {
  PartitionScheme s = parse_scheme("pool=N,Y,X");
  CHECK(s.pooled == preset("BN").pooled);
  CHECK(format_scheme(s) == "pool=N,Y,X");

  PartitionScheme none = parse_scheme("pool=");
  CHECK(none.pooled.empty());

  CHECK(parse_scheme("LN").pooled == preset("LN").pooled);
  CHECK_THROWS_AS(parse_scheme("pool=N,Q"), ParamError);
}

TEST_CASE("group ids are stable under flat and coordinate lookup") {
  GroupMap m = groups_of(preset("sample_channel"), {2, 3, 4, 5});
  long i = 0;
  for (long n = 0; n < 2; ++n)
    for (long y = 0; y < 3; ++y)
      for (long x = 0; x < 4; ++x)
        for (long c = 0; c < 5; ++c, ++i)
          CHECK(m.group_of_flat(i) == m.group_of(n, y, x, c));
}
