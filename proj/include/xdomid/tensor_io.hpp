#pragma once

#include <iosfwd>
#include <string>

#include "xdomid/tensor.hpp"

namespace xdomid {

// "XDT1" container: magic, u32 rank, rank× u64 extents, little-endian f64
// payload, row-major.
void write_tensor(std::ostream& out, const Tensor& t);
TensorPtr read_tensor(std::istream& in);
void write_tensor_file(const std::string& path, const Tensor& t);
TensorPtr read_tensor_file(const std::string& path);

void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);

}  // namespace xdomid
