#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "ookb/numerics/tensor.hpp"

namespace ookb::numerics {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

// On-disk layout of a parameter checkpoint directory:
//   tensors.bin    raw little-endian values, column-major, concatenated
//   manifest.json  {"format", "tensors": [{name, role, shape, dtype, offset, bytes}], "adam_steps", "meta"}
// Every parameter contributes a "value" entry; trainable ones also "adam_m"
// and "adam_v" so training resumes exactly.
inline constexpr const char* kCheckpointFormat = "ookb-checkpoint-1";

template <typename Scalar>
constexpr const char* dtype_name() {
  static_assert(std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>);
  return std::is_same_v<Scalar, float> ? "f32" : "f64";
}

namespace detail {

template <typename Scalar>
void append_tensor(std::string& blob, nlohmann::json& entries, const std::string& name, const char* role,
                   const Matrix<Scalar>& m) {
  const auto offset = blob.size();
  const auto bytes = static_cast<std::size_t>(m.size()) * sizeof(Scalar);
  blob.resize(offset + bytes);
  if (bytes > 0) std::memcpy(blob.data() + offset, m.data(), bytes);
  entries.push_back({{"name", name},
                     {"role", role},
                     {"shape", {m.rows(), m.cols()}},
                     {"dtype", dtype_name<Scalar>()},
                     {"offset", offset},
                     {"bytes", bytes}});
}

template <typename Scalar, typename Stored>
Matrix<Scalar> decode(const std::string& blob, std::size_t offset, Index rows, Index cols) {
  Eigen::Matrix<Stored, Eigen::Dynamic, Eigen::Dynamic> raw(rows, cols);
  const auto bytes = static_cast<std::size_t>(raw.size()) * sizeof(Stored);
  if (offset + bytes > blob.size()) throw DataError("checkpoint tensor extends past end of tensors.bin");
  if (bytes > 0) std::memcpy(raw.data(), blob.data() + offset, bytes);
  return raw.template cast<Scalar>();
}

}  // namespace detail

template <typename Scalar>
void save_checkpoint(const std::string& dir, const ParamStore<Scalar>& store, const nlohmann::json& meta) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create checkpoint directory " + dir + ": " + ec.message());

  std::string blob;
  nlohmann::json entries = nlohmann::json::array();
  nlohmann::json steps = nlohmann::json::object();
  for (const auto& p : store) {
    detail::append_tensor(blob, entries, p.name, "value", p.value);
    if (p.trainable) {
      detail::append_tensor(blob, entries, p.name, "adam_m", p.adam_m);
      detail::append_tensor(blob, entries, p.name, "adam_v", p.adam_v);
      steps[p.name] = p.adam_steps;
    }
  }
  nlohmann::json manifest = {{"format", kCheckpointFormat}, {"tensors", entries}, {"adam_steps", steps}, {"meta", meta}};

  // Write to temporaries first so a crash never leaves a half-written pair.
  const auto bin = fs::path(dir) / "tensors.bin";
  const auto man = fs::path(dir) / "manifest.json";
  {
    std::ofstream out(bin.string() + ".tmp", std::ios::binary);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw DataError("checkpoint write failed: " + bin.string());
  }
  {
    std::ofstream out(man.string() + ".tmp", std::ios::binary);
    out << manifest.dump(1) << '\n';
    if (!out) throw DataError("checkpoint write failed: " + man.string());
  }
  fs::rename(bin.string() + ".tmp", bin, ec);
  if (!ec) fs::rename(man.string() + ".tmp", man, ec);
  if (ec) throw DataError("checkpoint rename failed in " + dir + ": " + ec.message());
}

inline nlohmann::json read_checkpoint_manifest(const std::string& dir) {
  const auto path = (std::filesystem::path(dir) / "manifest.json").string();
  std::ifstream in(path);
  if (!in) throw DataError("missing checkpoint manifest: " + path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint manifest " + path + ": " + e.what());
  }
  if (manifest.value("format", "") != kCheckpointFormat) throw DataError("unsupported checkpoint format in " + path);
  return manifest;
}

// Fills every parameter of `store` (which must already hold tensors of the
// same names and shapes) from the checkpoint, converting dtype as needed.
// Returns the manifest's "meta" object.
template <typename Scalar>
nlohmann::json load_checkpoint(const std::string& dir, ParamStore<Scalar>& store) {
  const auto manifest = read_checkpoint_manifest(dir);
  std::ifstream in((std::filesystem::path(dir) / "tensors.bin").string(), std::ios::binary);
  if (!in) throw DataError("missing tensors.bin in " + dir);
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<bool> seen(store.size(), false);
  for (const auto& e : manifest.at("tensors")) {
    const auto name = e.at("name").get<std::string>();
    if (!store.contains(name)) throw DataError("checkpoint tensor not in model: " + name);
    auto& p = store.get(name);
    const auto rows = e.at("shape").at(0).get<Index>();
    const auto cols = e.at("shape").at(1).get<Index>();
    if (rows != p.value.rows() || cols != p.value.cols())
      throw DataError("checkpoint shape mismatch for " + name + ": stored " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ", model " + std::to_string(p.value.rows()) + "x" +
                      std::to_string(p.value.cols()));
    const auto dtype = e.at("dtype").get<std::string>();
    const auto offset = e.at("offset").get<std::size_t>();
    Matrix<Scalar> m = dtype == "f32"   ? detail::decode<Scalar, float>(blob, offset, rows, cols)
                       : dtype == "f64" ? detail::decode<Scalar, double>(blob, offset, rows, cols)
                                        : throw DataError("unknown dtype " + dtype);
    const auto role = e.at("role").get<std::string>();
    if (role == "value") {
      p.value = std::move(m);
      seen[store.handle(name)] = true;
    } else if (role == "adam_m") {
      p.adam_m = std::move(m);
    } else if (role == "adam_v") {
      p.adam_v = std::move(m);
    } else {
      throw DataError("unknown tensor role " + role);
    }
  }
  for (std::size_t i = 0; i < store.size(); ++i)
    if (!seen[i]) throw DataError("checkpoint lacks tensor " + store[i].name);
  for (auto& [name, steps] : manifest.at("adam_steps").items())
    if (store.contains(name)) store.get(name).adam_steps = steps.template get<std::int64_t>();
  return manifest.value("meta", nlohmann::json::object());
}

}  // namespace ookb::numerics
