#include "vqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace vqa {

namespace {

constexpr char kMagic[8] = {'C', '3', 'D', 'V', 'Q', 'A', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& os, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  write_u32(os, bits);
}

float read_f32(std::istream& is) { return std::bit_cast<float>(read_u32(is)); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string());
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t->rank()));
    for (std::int64_t e : t->shape()) write_u32(os, static_cast<std::uint32_t>(e));
    for (float v : t->data()) write_f32(os, v);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, const NamedTensors& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const std::uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = read_u32(is);

  std::map<std::string, TensorPtr> by_name;
  for (const auto& [name, t] : params) {
    if (!by_name.emplace(name, t).second) {
      throw std::runtime_error("checkpoint: duplicate parameter name " + name);
    }
  }
  if (count != params.size()) {
    throw std::runtime_error("checkpoint: file holds " + std::to_string(count) +
                             " entries, model has " + std::to_string(params.size()));
  }

  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("checkpoint: unknown parameter " + name);
    }
    const std::uint32_t rank = read_u32(is);
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::int64_t>(read_u32(is));
    if (shape != it->second->shape()) {
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    }
    auto data = it->second->data();
    for (float& v : data) v = read_f32(is);
  }
}

}  // namespace vqa
