#include "listenlab/tensor_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "listenlab/common.hpp"

namespace listenlab {

namespace {

constexpr char kMagic[4] = {'M', 'T', 'N', 'S'};
constexpr uint8_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 0;

void put_u32_le(std::string& buf, uint32_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
  buf.push_back(static_cast<char>((v >> 16) & 0xff));
  buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void save_tensor_f32(const std::string& path, const Tensor<float>& t) {
  std::string buf;
  buf.append(kMagic, 4);
  buf.push_back(static_cast<char>(kVersion));
  buf.push_back(static_cast<char>(kDtypeF32));
  buf.push_back(static_cast<char>(t.ndim()));
  buf.push_back(0);  // padding
  for (int64_t e : t.shape()) put_u32_le(buf, static_cast<uint32_t>(e));
  for (float v : t.data()) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32_le(buf, bits);
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw IoError("write failed: " + path);
}

Tensor<float> load_tensor_f32(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 8 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw IoError("not a tensor file: " + path);
  if (buf[4] != kVersion) throw IoError("unsupported tensor file version in " + path);
  if (buf[5] != kDtypeF32) throw IoError("unsupported tensor dtype in " + path);
  size_t ndim = buf[6];
  size_t off = 8;
  if (buf.size() < off + 4 * ndim) throw IoError("truncated tensor header: " + path);
  Shape shape(ndim);
  int64_t numel = 1;
  for (size_t i = 0; i < ndim; ++i) {
    shape[i] = get_u32_le(buf.data() + off);
    off += 4;
    numel *= shape[i];
  }
  if (buf.size() != off + 4 * static_cast<size_t>(numel))
    throw IoError("truncated tensor payload: " + path);
  std::vector<float> data(static_cast<size_t>(numel));
  for (int64_t i = 0; i < numel; ++i) {
    uint32_t bits = get_u32_le(buf.data() + off);
    off += 4;
    std::memcpy(&data[static_cast<size_t>(i)], &bits, 4);
  }
  return Tensor<float>(std::move(shape), std::move(data));
}

}  // namespace listenlab
