#pragma once

// Container plumbing shared by trace and patch-plan files.

#include "latentkg/common.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace latentkg::detail {

using nlohmann::json;

struct BlobEntry {
  std::string name;
  std::string dtype = "f32le";
  std::vector<std::int64_t> shape;
  std::string file;
};

json blob_to_json(const BlobEntry& blob);
BlobEntry blob_from_json(const json& j);

void write_f32le(const std::filesystem::path& path, std::span<const float> values);
// Checks dtype and that the file holds exactly prod(shape) floats.
std::vector<float> read_f32le(const std::filesystem::path& dir, const BlobEntry& blob);

RowMatrixf read_matrix_blob(const std::filesystem::path& dir, const BlobEntry& blob,
                            std::int64_t rows, std::int64_t cols);
BlobEntry write_matrix_blob(const std::filesystem::path& dir, const std::string& name,
                            const RowMatrixf& m);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Typed manifest field access; FormatError names the field on failure.
template <typename T>
T manifest_field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) {
    throw FormatError(std::string("manifest field '") + name + "' is missing");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("manifest field '") + name +
                      "' has the wrong type");
  }
}

}  // namespace latentkg::detail
