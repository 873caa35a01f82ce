#include "topicdial/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "topicdial/error.hpp"

namespace topicdial {

using nlohmann::json;

static_assert(sizeof(double) == 8, "float64 payload assumed");

namespace {

void require_little_endian() {
  if constexpr (std::endian::native != std::endian::little)
    throw DataError("checkpoint payloads are little-endian; host byte order differs");
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& base_path) {
  require_little_endian();
  json manifest;
  manifest["format"] = "topicdial-checkpoint-v1";
  manifest["byte_order"] = "little";
  manifest["scalar"] = "float64";
  manifest["meta"] = ckpt.meta;

  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    tensors.push_back({{"name", name},
                       {"rows", t.rows},
                       {"cols", t.cols},
                       {"offset_bytes", offset}});
    offset += static_cast<std::uint64_t>(t.size()) * sizeof(double);
  }
  manifest["tensors"] = tensors;
  manifest["payload_bytes"] = offset;

  std::ofstream mout(base_path + ".manifest.json");
  if (!mout) throw DataError("cannot write checkpoint manifest '" + base_path + "'");
  mout << manifest.dump(1) << '\n';

  std::ofstream bout(base_path + ".bin", std::ios::binary);
  if (!bout) throw DataError("cannot write checkpoint payload '" + base_path + "'");
  for (const auto& [name, t] : ckpt.tensors) {
    bout.write(reinterpret_cast<const char*>(t.data.data()),
               static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!bout) throw DataError("short write on checkpoint payload '" + base_path + "'");
}

Checkpoint load_checkpoint(const std::string& base_path) {
  require_little_endian();
  std::ifstream min(base_path + ".manifest.json");
  if (!min) throw DataError("cannot open checkpoint manifest '" + base_path + ".manifest.json'");
  json manifest;
  try {
    min >> manifest;
  } catch (const json::exception& e) {
    throw DataError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "topicdial-checkpoint-v1")
    throw DataError("unrecognized checkpoint format in '" + base_path + "'");
  if (manifest.value("byte_order", "") != "little" || manifest.value("scalar", "") != "float64")
    throw DataError("unsupported checkpoint encoding in '" + base_path + "'");

  std::ifstream bin(base_path + ".bin", std::ios::binary | std::ios::ate);
  if (!bin) throw DataError("cannot open checkpoint payload '" + base_path + ".bin'");
  const std::uint64_t file_size = static_cast<std::uint64_t>(bin.tellg());
  if (file_size != manifest.value("payload_bytes", std::uint64_t(0)))
    throw DataError("checkpoint payload size disagrees with the manifest");
  bin.seekg(0);

  Checkpoint ckpt;
  ckpt.meta = manifest.value("meta", json::object());
  std::uint64_t expected_offset = 0;
  try {
    for (const auto& tj : manifest.at("tensors")) {
      std::string name = tj.at("name").get<std::string>();
      int rows = tj.at("rows").get<int>();
      int cols = tj.at("cols").get<int>();
      std::uint64_t offset = tj.at("offset_bytes").get<std::uint64_t>();
      if (rows < 0 || cols < 0 || offset != expected_offset)
        throw DataError("checkpoint tensor '" + name + "' has inconsistent layout");
      Tensor t(rows, cols);
      bin.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.size() * sizeof(double)));
      if (!bin) throw DataError("checkpoint payload truncated at tensor '" + name + "'");
      expected_offset += static_cast<std::uint64_t>(t.size()) * sizeof(double);
      ckpt.tensors.emplace(std::move(name), std::move(t));
    }
  } catch (const json::exception& e) {
    throw DataError("checkpoint manifest violates the schema: " + std::string(e.what()));
  }
  if (expected_offset != file_size)
    throw DataError("checkpoint payload has trailing bytes");
  return ckpt;
}

}  // namespace topicdial
