#include "vqa/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vqa {

void write_pgm(const std::filesystem::path& path, std::span<const std::uint8_t> pixels,
               std::int64_t width, std::int64_t height) {
  if (width < 1 || height < 1 ||
      static_cast<std::int64_t>(pixels.size()) != width * height) {
    throw std::invalid_argument("write_pgm: pixel count does not match extents");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_pgm: cannot open " + path.string());
  os << "P5\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
  if (!os) throw std::runtime_error("write_pgm: write failed for " + path.string());
}

void write_pgm_normalized(const std::filesystem::path& path, std::span<const float> values,
                          std::int64_t width, std::int64_t height) {
  if (static_cast<std::int64_t>(values.size()) != width * height) {
    throw std::invalid_argument("write_pgm_normalized: value count does not match extents");
  }
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  const float mn = *mn_it, mx = *mx_it;
  std::vector<std::uint8_t> px(values.size(), 0);
  if (mx > mn) {
    const float scale = 255.0f / (mx - mn);
    for (std::size_t i = 0; i < values.size(); ++i) {
      px[i] = static_cast<std::uint8_t>(
          std::lround(std::clamp((values[i] - mn) * scale, 0.0f, 255.0f)));
    }
  }
  write_pgm(path, px, width, height);
}

}  // namespace vqa
