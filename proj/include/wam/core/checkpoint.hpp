#pragma once

#include <filesystem>
#include <string>

#include "wam/core/param_store.hpp"

namespace wam::core {

/// Checkpoint file layout: a UTF-8 text header with one line per tensor
/// ("name dim0 dim1 ..."), a blank line, then little-endian IEEE-754 float32
/// payloads concatenated in header order. Header order is the store's
/// lexicographic name order, so saves are canonical and reloads round-trip
/// bit-exactly.
void save_checkpoint(const ParamStore& store, const std::filesystem::path& path);

ParamStore load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the file bytes; used to assert checkpoints untouched.
std::uint64_t file_digest(const std::filesystem::path& path);

} // namespace wam::core
