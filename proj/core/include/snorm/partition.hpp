#pragma once

#include <string>
#include <vector>

#include "snorm/tensor.hpp"

namespace snorm {

// Which axes are pooled together to form each normalization group. Every
// Figure-1-style reference set is an axis subset: the BN preset pools
// {N,Y,X} (per channel across the batch), the LN preset pools {Y,X,C}
// (everything within one sample), neuron-wise pools only {N}.
struct PartitionScheme {
  AxisSet pooled;
  std::string name;  // optional label ("BN", "BA1", "pool=N,Y,X", ...)

  bool pools(Axis a) const { return pooled.contains(a); }
  // Sample-normalization schemes pool within one sample only.
  bool per_sample() const { return !pooled.contains(Axis::N); }
  bool operator==(const PartitionScheme& o) const { return pooled == o.pooled; }
};

// Named presets: BN, LN, neuron_wise, layer_batch, sample_channel.
// Unknown names throw ParamError.
PartitionScheme preset(const std::string& name);

// Parse "BN" / "neuron_wise" / "pool=N,Y,X" / "pool=" (empty set).
PartitionScheme parse_scheme(const std::string& text);
std::string format_scheme(const PartitionScheme& scheme);

// Group index map of a scheme applied to a concrete shape. Elements share
// a group id iff they agree on every non-pooled coordinate; ids are the
// row-major index over the non-pooled axes. Groups tile the tensor.
class GroupMap {
 public:
  GroupMap() = default;
  GroupMap(const PartitionScheme& scheme, Shape4 shape);

  long group_count() const { return group_count_; }
  long group_size() const { return group_size_; }
  const Shape4& shape() const { return shape_; }
  const PartitionScheme& scheme() const { return scheme_; }

  long group_of(long n, long y, long x, long c) const {
    return n * gs_n_ + y * gs_y_ + x * gs_x_ + c * gs_c_;
  }
  long group_of_flat(long flat) const {
    const long c = flat % shape_.c;
    flat /= shape_.c;
    const long x = flat % shape_.x;
    flat /= shape_.x;
    const long y = flat % shape_.y;
    const long n = flat / shape_.y;
    return group_of(n, y, x, c);
  }

  // Per-element group ids in flat memory order.
  std::vector<long> materialize() const;

  bool compatible_with(Shape4 s) const { return shape_ == s; }

 private:
  PartitionScheme scheme_;
  Shape4 shape_;
  long group_count_ = 0;
  long group_size_ = 0;
  long gs_n_ = 0, gs_y_ = 0, gs_x_ = 0, gs_c_ = 0;
};

inline GroupMap groups_of(const PartitionScheme& scheme, Shape4 shape) {
  return GroupMap(scheme, shape);
}

}  // namespace snorm
