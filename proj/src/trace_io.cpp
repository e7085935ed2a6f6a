#include "latentkg/trace_io.hpp"

#include "blob_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace latentkg {

namespace detail {

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) |
         (v >> 24);
}

std::string shape_string(const std::vector<std::int64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

json blob_to_json(const BlobEntry& blob) {
  return json{{"name", blob.name},
              {"dtype", blob.dtype},
              {"shape", blob.shape},
              {"file", blob.file}};
}

BlobEntry blob_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("blob table entry is not an object");
  BlobEntry b;
  b.name = manifest_field<std::string>(j, "name");
  b.dtype = manifest_field<std::string>(j, "dtype");
  b.shape = manifest_field<std::vector<std::int64_t>>(j, "shape");
  b.file = manifest_field<std::string>(j, "file");
  if (b.file.empty() || b.file.find('/') != std::string::npos ||
      b.file.find('\\') != std::string::npos || b.file == "..") {
    throw FormatError("blob '" + b.name + "': file must be a plain file name");
  }
  return b;
}

void write_f32le(const std::filesystem::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float f : values) {
      std::uint32_t bits = byteswap32(std::bit_cast<std::uint32_t>(f));
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

std::vector<float> read_f32le(const std::filesystem::path& dir, const BlobEntry& blob) {
  if (blob.dtype != "f32le") {
    throw FormatError("blob '" + blob.name + "': unsupported dtype '" +
                      blob.dtype + "'");
  }
  std::int64_t count = 1;
  for (std::int64_t s : blob.shape) {
    if (s < 0) throw FormatError("blob '" + blob.name + "': negative shape");
    count *= s;
  }
  const auto path = dir / blob.file;
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw FormatError("blob '" + blob.name + "': cannot read " + path.string());
  const auto expected = static_cast<std::uintmax_t>(count) * sizeof(float);
  if (size != expected) {
    throw FormatError("blob '" + blob.name + "': shape " +
                      shape_string(blob.shape) + " needs " +
                      std::to_string(expected) + " bytes but " + blob.file +
                      " holds " + std::to_string(size) +
                      (size < expected ? " (truncated)" : ""));
  }
  std::vector<float> values(static_cast<std::size_t>(count));
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(expected));
  if (!in) throw FormatError("blob '" + blob.name + "': short read");
  if constexpr (std::endian::native != std::endian::little) {
    for (float& f : values) {
      f = std::bit_cast<float>(byteswap32(std::bit_cast<std::uint32_t>(f)));
    }
  }
  return values;
}

RowMatrixf read_matrix_blob(const std::filesystem::path& dir, const BlobEntry& blob,
                            std::int64_t rows, std::int64_t cols) {
  if (blob.shape.size() != 2 || blob.shape[0] != rows || blob.shape[1] != cols) {
    throw FormatError("blob '" + blob.name + "': shape " +
                      shape_string(blob.shape) + " does not match expected [" +
                      std::to_string(rows) + "," + std::to_string(cols) + "]");
  }
  const std::vector<float> values = read_f32le(dir, blob);
  RowMatrixf m(rows, cols);
  if (!values.empty()) std::memcpy(m.data(), values.data(), values.size() * sizeof(float));
  return m;
}

BlobEntry write_matrix_blob(const std::filesystem::path& dir, const std::string& name,
                            const RowMatrixf& m) {
  BlobEntry b;
  b.name = name;
  b.shape = {m.rows(), m.cols()};
  b.file = name + ".f32le";
  write_f32le(dir / b.file, std::span(m.data(), static_cast<std::size_t>(m.size())));
  return b;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw FormatError(path.string() + " is not valid JSON");
  return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace detail

using detail::BlobEntry;
using detail::json;
using detail::manifest_field;

void save_trace(const ActivationTrace& trace, const std::filesystem::path& dir) {
  trace.validate();
  std::filesystem::create_directories(dir);
  json blobs = json::array();
  for (const auto& la : trace.layers) {
    blobs.push_back(detail::blob_to_json(detail::write_matrix_blob(
        dir, "layer_" + std::to_string(la.layer_index), la.matrix)));
  }
  for (const auto& [l, m] : trace.attention) {
    blobs.push_back(detail::blob_to_json(
        detail::write_matrix_blob(dir, "attn_l" + std::to_string(l), m)));
  }
  json manifest{
      {"version", kContainerVersion},
      {"kind", "trace"},
      {"model_name", trace.model_name},
      {"L", trace.config.layer_count},
      {"d", trace.config.hidden_dim},
      {"vocab_size", trace.config.vocab_size},
      {"max_new_tokens", trace.config.max_new_tokens},
      {"seed", trace.config.seed},
      {"token_ids", trace.tokens.ids},
      {"token_texts", trace.tokens.texts},
      {"input_span", {trace.input_span.start, trace.input_span.end}},
      {"generated_text", trace.generated_text},
      {"blobs", blobs},
  };
  if (trace.weights) manifest["weights"] = *trace.weights;
  detail::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

ActivationTrace load_trace(const std::filesystem::path& dir) {
  const json m = detail::read_json_file(dir / "manifest.json");
  if (!m.is_object()) throw FormatError("manifest is not a JSON object");
  const int version = manifest_field<int>(m, "version");
  if (version != kContainerVersion) {
    throw FormatError("manifest field 'version' is " + std::to_string(version) +
                      ", expected " + std::to_string(kContainerVersion));
  }

  ActivationTrace t;
  t.model_name = m.value("model_name", std::string("unknown"));
  t.config.layer_count = manifest_field<int>(m, "L");
  t.config.hidden_dim = manifest_field<int>(m, "d");
  t.tokens.ids = manifest_field<std::vector<int>>(m, "token_ids");
  t.tokens.texts = manifest_field<std::vector<std::string>>(m, "token_texts");
  if (t.tokens.ids.size() != t.tokens.texts.size()) {
    throw FormatError("manifest field 'token_texts' differs in length from 'token_ids'");
  }
  // Exporter manifests may omit generation settings of the toy model.
  int max_id = 1;
  for (int id : t.tokens.ids) max_id = std::max(max_id, id);
  t.config.vocab_size = m.contains("vocab_size") ? manifest_field<int>(m, "vocab_size")
                                                 : max_id + 1;
  t.config.max_new_tokens =
      m.contains("max_new_tokens") ? manifest_field<int>(m, "max_new_tokens") : 1;
  t.config.seed = m.contains("seed") ? manifest_field<std::uint64_t>(m, "seed") : 0;
  try {
    t.config.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("manifest model fields: ") + e.what());
  }

  const auto span = manifest_field<std::vector<int>>(m, "input_span");
  if (span.size() != 2) throw FormatError("manifest field 'input_span' must hold two integers");
  t.input_span = {span[0], span[1]};
  t.generated_text = manifest_field<std::string>(m, "generated_text");
  if (m.contains("weights") && !m["weights"].is_null()) {
    t.weights = manifest_field<std::vector<float>>(m, "weights");
  }

  const auto blobs = manifest_field<json>(m, "blobs");
  if (!blobs.is_array()) throw FormatError("manifest field 'blobs' must be an array");
  std::map<std::string, BlobEntry> by_name;
  for (const auto& b : blobs) {
    BlobEntry entry = detail::blob_from_json(b);
    by_name[entry.name] = std::move(entry);
  }
  const auto n = static_cast<std::int64_t>(t.tokens.size());
  for (int l = 0; l <= t.config.layer_count; ++l) {
    const std::string name = "layer_" + std::to_string(l);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("blob '" + name + "' missing from manifest");
    t.layers.push_back({l, detail::read_matrix_blob(dir, it->second, n, t.config.hidden_dim)});
  }
  for (int l = 1; l <= t.config.layer_count; ++l) {
    const std::string name = "attn_l" + std::to_string(l);
    auto it = by_name.find(name);
    if (it == by_name.end()) continue;
    const auto& shape = it->second.shape;
    if (shape.size() != 2) throw FormatError("blob '" + name + "' must be two-dimensional");
    t.attention.emplace(l, detail::read_matrix_blob(dir, it->second, shape[0], shape[1]));
  }
  t.validate();
  return t;
}

}  // namespace latentkg
