#include "listenlab/pgm.hpp"

#include <cmath>
#include <fstream>
#include <vector>

#include "listenlab/common.hpp"

namespace listenlab {

void write_pgm(const std::string& path, const Tensor<float>& image) {
  if (image.ndim() != 2)
    throw ValidationError("write_pgm: expected (H,W), got " + shape_str(image.shape()));
  int64_t h = image.extent(0), w = image.extent(1);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(w));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double v = std::floor(static_cast<double>(image[y * w + x]) * 255.0 + 0.5);
      if (v < 0.0) v = 0.0;
      if (v > 255.0) v = 255.0;
      row[static_cast<size_t>(x)] = static_cast<unsigned char>(v);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(w));
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace listenlab
