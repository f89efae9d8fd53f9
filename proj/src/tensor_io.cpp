#include "xdomid/tensor_io.hpp"

#include <cstring>
#include <fstream>

namespace xdomid {

namespace {
constexpr char kMagic[4] = {'X', 'D', 'T', '1'};
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  XD_CHECK(in.good(), "tensor file: truncated while reading u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  XD_CHECK(in.good(), "tensor file: truncated while reading u64");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(kMagic, 4);
  write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (int e : t.shape) write_u64(out, static_cast<std::uint64_t>(e));
  for (double v : t.data) write_f64(out, v);
}

TensorPtr read_tensor(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  XD_CHECK(in.good() && std::memcmp(magic, kMagic, 4) == 0,
           "tensor file: bad magic at byte offset 0 (expected XDT1)");
  std::uint32_t rank = read_u32(in);
  XD_CHECK(rank <= 8, "tensor file: implausible rank " + std::to_string(rank) +
                          " at byte offset 4");
  std::vector<int> shape(rank);
  for (auto& e : shape) {
    std::uint64_t ext = read_u64(in);
    XD_CHECK(ext > 0 && ext < (1ull << 31), "tensor file: bad extent");
    e = static_cast<int>(ext);
  }
  auto t = Tensor::zeros(shape);
  for (auto& v : t->data) v = read_f64(in);
  return t;
}

void write_tensor_file(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  XD_CHECK(out.good(), "cannot open for write: " + path);
  write_tensor(out, t);
  XD_CHECK(out.good(), "write failed: " + path);
}

TensorPtr read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  XD_CHECK(in.good(), "cannot open: " + path);
  return read_tensor(in);
}

}  // namespace xdomid
