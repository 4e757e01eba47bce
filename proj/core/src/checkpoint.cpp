// Copyright 2026 avsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avsep/checkpoint.h"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "avsep/error.h"
#include "json.hpp"

namespace avsep {

namespace {

// Layout: "AVCK" | u32 version | u64 header bytes | header JSON | blob.
// The header's tensor table stores role, shape, dtype, and blob offsets, so
// readers can skip or reorder without assumptions beyond the table itself.
constexpr char kMagic[4] = {'A', 'V', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  AVSEP_CHECK(is.good(), "checkpoint " << path << ": truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  AVSEP_CHECK(is.good(), "checkpoint " << path << ": truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

nlohmann::json parse_field(const std::string& text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + what + " is not valid JSON: " +
                          e.what());
  }
}

void append_blob(std::vector<char>& blob, const std::vector<double>& data,
                 const std::string& dtype) {
  if (dtype == "f64") {
    const std::size_t at = blob.size();
    blob.resize(at + data.size() * sizeof(double));
    std::memcpy(blob.data() + at, data.data(), data.size() * sizeof(double));
  } else {
    std::vector<float> narrow(data.begin(), data.end());
    const std::size_t at = blob.size();
    blob.resize(at + narrow.size() * sizeof(float));
    std::memcpy(blob.data() + at, narrow.data(), narrow.size() * sizeof(float));
  }
}

struct TableEntry {
  std::string name;
  std::string role;  // "value" | "adam_m" | "adam_v"
  std::vector<int> shape;
  std::string dtype;
  std::uint64_t offset = 0;
  std::uint64_t count = 0;
};

nlohmann::json read_header(std::istream& is, const std::string& path) {
  char magic[4];
  is.read(magic, 4);
  AVSEP_CHECK(is.good() && std::memcmp(magic, kMagic, 4) == 0,
              "checkpoint " << path << ": bad magic, not a checkpoint file");
  const std::uint32_t version = get_u32(is, path);
  AVSEP_CHECK(version == kVersion, "checkpoint " << path << ": unsupported version "
                                                 << version << ", expected " << kVersion);
  const std::uint64_t hlen = get_u64(is, path);
  std::string text(hlen, '\0');
  is.read(text.data(), static_cast<std::streamsize>(hlen));
  AVSEP_CHECK(is.good(), "checkpoint " << path << ": truncated header");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint " + path + ": corrupt header: " + e.what());
  }
}

CheckpointInfo info_from_header(const nlohmann::json& h) {
  CheckpointInfo info;
  info.kind = h.at("kind").get<std::string>();
  info.config_json = h.at("config").dump();
  info.extra_json = h.at("extra").dump();
  info.adam_steps = h.at("adam_steps").get<long long>();
  info.has_optimizer = h.at("optimizer").get<bool>();
  for (const auto& e : h.at("tensors")) {
    if (e.at("role").get<std::string>() == "value")
      info.tensor_names.push_back(e.at("name").get<std::string>());
  }
  return info;
}

void read_tensor_blob(std::istream& is, std::uint64_t blob_start, const TableEntry& e,
                      const std::string& path, ad::Tensor& out) {
  AVSEP_CHECK(e.dtype == "f64" || e.dtype == "f32",
              "checkpoint " << path << ": tensor " << e.name << " has unknown dtype "
                            << e.dtype);
  const std::size_t width = e.dtype == "f64" ? sizeof(double) : sizeof(float);
  is.clear();
  is.seekg(static_cast<std::streamoff>(blob_start + e.offset));
  std::vector<char> raw(e.count * width);
  is.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  AVSEP_CHECK(is.gcount() == static_cast<std::streamsize>(raw.size()),
              "checkpoint " << path << ": truncated blob for tensor " << e.name);
  out = ad::Tensor(e.shape);
  if (e.dtype == "f64") {
    std::memcpy(out.data.data(), raw.data(), raw.size());
  } else {
    const float* f = reinterpret_cast<const float*>(raw.data());
    for (std::size_t i = 0; i < e.count; ++i) out.data[i] = static_cast<double>(f[i]);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind,
                     const std::string& config_json, const ParamStore& params,
                     const std::string& extra_json, bool include_optimizer,
                     const std::string& dtype) {
  AVSEP_CHECK(!kind.empty(), "checkpoint: kind must not be empty");
  AVSEP_CHECK(dtype == "f64" || dtype == "f32",
              "checkpoint: dtype must be f64 or f32, got " << dtype);
  nlohmann::json header;
  header["kind"] = kind;
  header["config"] = parse_field(config_json, "config_json");
  header["extra"] = parse_field(extra_json, "extra_json");
  header["adam_steps"] = params.adam_steps();
  header["optimizer"] = include_optimizer;

  std::vector<char> blob;
  nlohmann::json table = nlohmann::json::array();
  auto add_entry = [&](const std::string& name, const char* role,
                       const ad::Tensor& tensor) {
    nlohmann::json e;
    e["name"] = name;
    e["role"] = role;
    e["shape"] = tensor.shape;
    e["dtype"] = dtype;
    e["offset"] = blob.size();
    e["count"] = tensor.numel();
    table.push_back(e);
    append_blob(blob, tensor.data, dtype);
  };
  for (const std::string& name : params.names()) {
    add_entry(name, "value", params.at(name));
    if (include_optimizer) {
      add_entry(name, "adam_m", params.adam_m(name));
      add_entry(name, "adam_v", params.adam_v(name));
    }
  }
  header["tensors"] = std::move(table);

  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  os.flush();
  if (!os) throw IoError("checkpoint: write to " + path + " failed");
}

CheckpointInfo peek_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  return info_from_header(read_header(is, path));
}

CheckpointInfo load_checkpoint(const std::string& path, const std::string& expected_kind,
                               ParamStore& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  const nlohmann::json header = read_header(is, path);
  const std::uint64_t blob_start = static_cast<std::uint64_t>(is.tellg());

  CheckpointInfo info = info_from_header(header);
  AVSEP_CHECK(info.kind == expected_kind,
              "checkpoint " << path << ": holds a " << info.kind << " model, expected "
                            << expected_kind);

  std::vector<TableEntry> entries;
  for (const auto& e : header.at("tensors")) {
    TableEntry te;
    te.name = e.at("name").get<std::string>();
    te.role = e.at("role").get<std::string>();
    te.shape = e.at("shape").get<std::vector<int>>();
    te.dtype = e.at("dtype").get<std::string>();
    te.offset = e.at("offset").get<std::uint64_t>();
    te.count = e.at("count").get<std::uint64_t>();
    AVSEP_CHECK(params.has(te.name), "checkpoint " << path << ": unknown tensor "
                                                   << te.name
                                                   << " not registered in this model");
    const ad::Tensor& reg = params.at(te.name);
    AVSEP_CHECK(te.shape == reg.shape, "checkpoint " << path << ": tensor " << te.name
                                                     << " shape mismatch");
    AVSEP_CHECK(te.count == reg.numel(), "checkpoint " << path << ": tensor " << te.name
                                                       << " count mismatch");
    entries.push_back(std::move(te));
  }

  std::size_t loaded_values = 0;
  for (const TableEntry& e : entries) {
    if (e.role == "value") {
      read_tensor_blob(is, blob_start, e, path, params.at(e.name));
      ++loaded_values;
    } else if (e.role == "adam_m") {
      read_tensor_blob(is, blob_start, e, path, params.adam_m(e.name));
    } else if (e.role == "adam_v") {
      read_tensor_blob(is, blob_start, e, path, params.adam_v(e.name));
    } else {
      throw ValidationError("checkpoint " + path + ": tensor " + e.name +
                            " has unknown role " + e.role);
    }
  }
  AVSEP_CHECK(loaded_values == params.num_tensors(),
              "checkpoint " << path << ": file carries " << loaded_values
                            << " tensors, model registers " << params.num_tensors());
  if (info.has_optimizer) {
    params.set_adam_steps(info.adam_steps);
  } else {
    // Weights-only file: optimizer restarts from scratch.
    for (const std::string& name : params.names()) {
      for (double& v : params.adam_m(name).data) v = 0.0;
      for (double& v : params.adam_v(name).data) v = 0.0;
    }
    params.set_adam_steps(0);
  }
  params.zero_grad();
  return info;
}

}  // namespace avsep
