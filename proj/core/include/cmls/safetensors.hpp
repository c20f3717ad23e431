#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cmls/tensor.hpp"

namespace cmls {

/// Tensors from a .safetensors file, converted to double. Supported dtypes:
/// F64, F32, F16, BF16. Rank-1 tensors load as 1 x n, rank-2 as rows x cols.
struct SafeTensor {
  std::vector<long> shape;
  Matrix data;
};

std::map<std::string, SafeTensor> read_safetensors(const std::filesystem::path& path);

}  // namespace cmls
