#include "gsmax/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gsmax/errors.hpp"

namespace gsmax {
namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("chunk file truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_chunks(std::span<const NamedTensor> tensors) {
  std::vector<std::uint8_t> out(std::begin(kChunkMagic), std::end(kChunkMagic));
  put_le<std::uint32_t>(out, kChunkVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put_le<std::uint64_t>(out, e);
    for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_chunks(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(sizeof(kChunkMagic));
  if (!std::equal(magic.begin(), magic.end(), std::begin(kChunkMagic),
                  [](std::uint8_t a, char b) { return a == static_cast<std::uint8_t>(b); })) {
    throw FormatError("bad chunk magic");
  }
  const auto version = r.get_le<std::uint32_t>();
  if (version != kChunkVersion) {
    throw FormatError("unsupported chunk version " + std::to_string(version));
  }
  const auto count = r.get_le<std::uint32_t>();
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get_le<std::uint32_t>();
    const auto name_bytes = r.take(name_len);
    std::string name(name_bytes.begin(), name_bytes.end());
    const auto rank = r.get_le<std::uint32_t>();
    if (rank == 0) throw FormatError("tensor '" + name + "' has rank 0");
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& e : shape) {
      e = static_cast<std::size_t>(r.get_le<std::uint64_t>());
      if (e == 0) throw FormatError("tensor '" + name + "' has a zero extent");
      if (n > r.remaining() / e) throw FormatError("tensor '" + name + "' extents exceed file");
      n *= e;
    }
    if (n > r.remaining() / 8) throw FormatError("tensor '" + name + "' payload truncated");
    std::vector<double> data(n);
    for (auto& v : data) v = std::bit_cast<double>(r.get_le<std::uint64_t>());
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  if (!r.done()) throw FormatError("trailing bytes after last chunk");
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_chunks(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  write_file_bytes(path, encode_chunks(tensors));
}

std::vector<NamedTensor> read_chunks(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_chunks(bytes);
}

const Tensor& find_chunk(std::span<const NamedTensor> tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  throw FormatError("chunk '" + name + "' not found");
}

}  // namespace gsmax
