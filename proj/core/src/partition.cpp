#include "snorm/partition.hpp"

namespace snorm {

PartitionScheme preset(const std::string& name) {
  if (name == "BN") return {{Axis::N, Axis::Y, Axis::X}, "BN"};
  if (name == "LN") return {{Axis::Y, Axis::X, Axis::C}, "LN"};
  if (name == "neuron_wise") return {{Axis::N}, "neuron_wise"};
  if (name == "layer_batch") return {{Axis::N, Axis::Y, Axis::X, Axis::C}, "layer_batch"};
  if (name == "sample_channel") return {{Axis::Y, Axis::X}, "sample_channel"};
  throw ParamError("unknown partition preset '" + name + "'");
}

PartitionScheme parse_scheme(const std::string& text) {
  if (text.rfind("pool=", 0) != 0) return preset(text);
  PartitionScheme s;
  s.name = text;
  std::string rest = text.substr(5);
  size_t pos = 0;
  while (pos < rest.size()) {
    size_t comma = rest.find(',', pos);
    std::string tok = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (tok == "N") s.pooled.add(Axis::N);
    else if (tok == "Y") s.pooled.add(Axis::Y);
    else if (tok == "X") s.pooled.add(Axis::X);
    else if (tok == "C") s.pooled.add(Axis::C);
    else if (!tok.empty()) throw ParamError("unknown axis '" + tok + "' in scheme '" + text + "'");
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return s;
}

std::string format_scheme(const PartitionScheme& scheme) {
  std::string out = "pool=";
  bool first = true;
  for (Axis a : {Axis::N, Axis::Y, Axis::X, Axis::C}) {
    if (!scheme.pools(a)) continue;
    if (!first) out += ",";
    first = false;
    out += (a == Axis::N ? "N" : a == Axis::Y ? "Y" : a == Axis::X ? "X" : "C");
  }
  return out;
}

GroupMap::GroupMap(const PartitionScheme& scheme, Shape4 shape)
    : scheme_(scheme), shape_(shape) {
  shape.validate();
  // Row-major strides over the kept (non-pooled) axes.
  long stride = 1;
  const bool keep_c = !scheme.pools(Axis::C);
  const bool keep_x = !scheme.pools(Axis::X);
  const bool keep_y = !scheme.pools(Axis::Y);
  const bool keep_n = !scheme.pools(Axis::N);
  if (keep_c) { gs_c_ = stride; stride *= shape.c; }
  if (keep_x) { gs_x_ = stride; stride *= shape.x; }
  if (keep_y) { gs_y_ = stride; stride *= shape.y; }
  if (keep_n) { gs_n_ = stride; stride *= shape.n; }
  group_count_ = stride;
  group_size_ = shape.count() / group_count_;
}

std::vector<long> GroupMap::materialize() const {
  std::vector<long> ids(static_cast<size_t>(shape_.count()));
  long i = 0;
  for (long n = 0; n < shape_.n; ++n)
    for (long y = 0; y < shape_.y; ++y)
      for (long x = 0; x < shape_.x; ++x)
        for (long c = 0; c < shape_.c; ++c, ++i)
          ids[static_cast<size_t>(i)] = group_of(n, y, x, c);
  return ids;
}

}  // namespace snorm
