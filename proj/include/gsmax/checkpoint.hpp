#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gsmax/tensor.hpp"

namespace gsmax {

/// Chunked tensor container used for checkpoints, activation dumps and
/// dataset dumps. All integers and payloads are little-endian.
///
///   offset  size  field
///   0       8     magic "GSMXCKPT"
///   8       4     u32 version (= 1)
///   12      4     u32 tensor count
///   then per tensor:
///           4     u32 name length L
///           L     name bytes (no terminator)
///           4     u32 rank R
///           8*R   u64 extents
///           8*N   f64 payload, row-major, N = product(extents)
///
/// Reading then writing a file reproduces it byte for byte.
struct NamedTensor {
  std::string name;
  Tensor tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

inline constexpr char kChunkMagic[8] = {'G', 'S', 'M', 'X', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kChunkVersion = 1;

std::vector<std::uint8_t> encode_chunks(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_chunks(std::span<const std::uint8_t> bytes);

void write_chunks(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_chunks(const std::filesystem::path& path);

/// Lookup by name; throws FormatError when absent.
const Tensor& find_chunk(std::span<const NamedTensor> tensors, const std::string& name);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace gsmax
