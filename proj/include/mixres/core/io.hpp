#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mixres/core/tensor.hpp"

namespace mixres::core {

/// FNV-1a over a byte buffer. Used for dataset content hashes.
std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes);

void append_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v);
void append_f64_le(std::vector<std::uint8_t>& out, double v);

/// In-memory MRT1 encoding: "MRT1", u32 LE rank, rank u32 LE dims,
/// little-endian IEEE-754 doubles.
std::vector<std::uint8_t> tensor_bytes(const Tensor& t);

void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace mixres::core
