#pragma once

#include "latentkg/trace.hpp"

#include <filesystem>

namespace latentkg {

inline constexpr int kContainerVersion = 1;

/// Writes the trace container: `manifest.json` plus one row-major
/// little-endian float32 blob per layer (`layer_{l}.f32le`) and, when
/// present, per-block attention blobs (`attn_l{l}.f32le`). The directory is
/// created if needed.
void save_trace(const ActivationTrace& trace, const std::filesystem::path& dir);

/// Reads a container written by save_trace or by the external exporter.
/// Version mismatches, truncated blobs and manifest/blob shape disagreements
/// raise FormatError naming the offending field.
ActivationTrace load_trace(const std::filesystem::path& dir);

}  // namespace latentkg
