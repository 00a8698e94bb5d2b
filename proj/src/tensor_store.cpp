#include "engram/tensor_store.hpp"

#include <cstring>
#include <fstream>

#include "engram/util.hpp"
#include "json.hpp"

namespace engram {

int64_t TensorInfo::element_count() const {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

const TensorInfo& NamedTensorStore::get(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail(ErrorCategory::integrity, "missing tensor: " + name);
  return it->second;
}

void NamedTensorStore::put(const std::string& name, std::vector<int64_t> shape,
                           std::vector<float> data) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  if (n != static_cast<int64_t>(data.size())) {
    fail(ErrorCategory::integrity, "tensor " + name + ": data size does not match shape");
  }
  tensors[name] = TensorInfo{"f32", std::move(shape), std::move(data)};
}

namespace {

bool is_f32(const std::string& dtype) { return dtype == "f32" || dtype == "F32"; }

}  // namespace

NamedTensorStore load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::asset, "cannot open weights file: " + path);

  unsigned char len_bytes[8];
  in.read(reinterpret_cast<char*>(len_bytes), 8);
  if (in.gcount() != 8) fail(ErrorCategory::parse, path + ": truncated header length");
  uint64_t header_len = 0;
  for (int i = 7; i >= 0; --i) header_len = (header_len << 8) | len_bytes[i];
  if (header_len > (1ull << 30)) fail(ErrorCategory::parse, path + ": implausible header length");

  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (static_cast<uint64_t>(in.gcount()) != header_len) {
    fail(ErrorCategory::parse, path + ": truncated JSON header");
  }

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::parse, path + ": bad JSON header: " + e.what());
  }
  if (!j.is_object()) fail(ErrorCategory::parse, path + ": header is not a JSON object");

  std::string data = [&] {
    std::string rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return rest;
  }();

  NamedTensorStore store;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "__metadata__") continue;
    const auto& e = it.value();
    if (!e.contains("dtype") || !e.contains("shape") || !e.contains("data_offsets")) {
      fail(ErrorCategory::parse, path + ": tensor " + it.key() + " missing header fields");
    }
    TensorInfo info;
    info.dtype = e["dtype"].get<std::string>();
    for (const auto& d : e["shape"]) info.shape.push_back(d.get<int64_t>());
    uint64_t begin = e["data_offsets"][0].get<uint64_t>();
    uint64_t end = e["data_offsets"][1].get<uint64_t>();
    if (end < begin || end > data.size()) {
      fail(ErrorCategory::parse, path + ": tensor " + it.key() + " offsets out of range");
    }
    if (is_f32(info.dtype)) {
      uint64_t n_bytes = end - begin;
      if (n_bytes != static_cast<uint64_t>(info.element_count()) * 4) {
        fail(ErrorCategory::integrity,
             path + ": tensor " + it.key() + " byte length does not match shape");
      }
      info.data.resize(n_bytes / 4);
      std::memcpy(info.data.data(), data.data() + begin, n_bytes);
    }
    if (!store.tensors.emplace(it.key(), std::move(info)).second) {
      fail(ErrorCategory::integrity, path + ": duplicate tensor name " + it.key());
    }
  }
  return store;
}

void save_tensors(const NamedTensorStore& store, const std::string& path) {
  nlohmann::json header = nlohmann::json::object();
  uint64_t offset = 0;
  for (const auto& [name, info] : store.tensors) {
    if (!is_f32(info.dtype)) continue;
    uint64_t n_bytes = static_cast<uint64_t>(info.element_count()) * 4;
    header[name] = {{"dtype", "f32"},
                    {"shape", info.shape},
                    {"data_offsets", {offset, offset + n_bytes}}};
    offset += n_bytes;
  }
  std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::asset, "cannot write weights file: " + path);
  uint64_t header_len = header_str.size();
  unsigned char len_bytes[8];
  for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<unsigned char>(header_len >> (8 * i));
  out.write(reinterpret_cast<const char*>(len_bytes), 8);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& [name, info] : store.tensors) {
    if (!is_f32(info.dtype)) continue;
    out.write(reinterpret_cast<const char*>(info.data.data()),
              static_cast<std::streamsize>(info.data.size() * 4));
  }
  if (!out) fail(ErrorCategory::asset, "write failed: " + path);
}

}  // namespace engram
