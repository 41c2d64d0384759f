#pragma once

#include <filesystem>
#include <iosfwd>

#include "l2g/tensor.hpp"

namespace l2g {

// "L2GT" dump format, all integers and floats little-endian:
//
//   char[4]  magic "L2GT"
//   u32      rank
//   u32      dims[rank]
//   f32      values[prod(dims)]   row-major
//
// Values are down-cast from double to float on write, so a reload returns
// the nearest float of each value.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace l2g
