#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace engram {

// Container for named f32 tensors, matching the on-disk layout:
// 8-byte little-endian header length, UTF-8 JSON header mapping tensor name
// to {dtype, shape, data_offsets}, then one contiguous raw data region.
// Offsets are relative to the start of the data region. Entries with dtypes
// other than f32 are preserved in the header map but carry no data here.
struct TensorInfo {
  std::string dtype;
  std::vector<int64_t> shape;
  std::vector<float> data;  // row-major; empty for non-f32 entries

  int64_t element_count() const;
};

struct NamedTensorStore {
  std::map<std::string, TensorInfo> tensors;

  bool has(const std::string& name) const { return tensors.count(name) != 0; }
  const TensorInfo& get(const std::string& name) const;
  void put(const std::string& name, std::vector<int64_t> shape, std::vector<float> data);
};

NamedTensorStore load_tensors(const std::string& path);
void save_tensors(const NamedTensorStore& store, const std::string& path);

}  // namespace engram
