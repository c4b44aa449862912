#include "mixres/core/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mixres::core {

namespace {

constexpr char kMagic[4] = {'M', 'R', 'T', '1'};

std::uint32_t read_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

double read_f64_le(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void append_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void append_f64_le(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
  }
}

std::vector<std::uint8_t> tensor_bytes(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 * t.rank() + 8 * t.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  append_u32_le(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    append_u32_le(out, static_cast<std::uint32_t>(d));
  }
  for (double v : t.data()) append_f64_le(out, v);
  return out;
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = tensor_bytes(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw std::runtime_error("not an MRT1 file: " + path.string());
  }
  std::uint32_t rank = read_u32_le(bytes.data() + 4);
  std::size_t header = 8 + 4 * static_cast<std::size_t>(rank);
  if (rank == 0 || bytes.size() < header) {
    throw std::runtime_error("corrupt MRT1 header: " + path.string());
  }
  std::vector<std::size_t> shape(rank);
  std::size_t numel = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape[i] = read_u32_le(bytes.data() + 8 + 4 * i);
    numel *= shape[i];
  }
  if (bytes.size() != header + 8 * numel) {
    throw std::runtime_error("MRT1 length mismatch: " + path.string() +
                             " declares " + std::to_string(numel) +
                             " values, payload holds " +
                             std::to_string((bytes.size() - header) / 8));
  }
  std::vector<double> data(numel);
  for (std::size_t i = 0; i < numel; ++i) {
    data[i] = read_f64_le(bytes.data() + header + 8 * i);
  }
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace mixres::core
