#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ccnn/common.hpp"
#include "ccnn/tensor.hpp"

namespace ccnn {

// Tensor dump format "T4D1": magic bytes, four little-endian uint32 dims
// (N, C, H, W), one dtype byte (4 = f32, 8 = f64), then the flat buffer,
// little-endian, row-major (N, C, H, W).

void write_t4d(const std::string& path, const Tensor4<float>& t);
void write_t4d(const std::string& path, const Tensor4<double>& t);

struct AnyTensor {
  Dtype dtype = Dtype::F64;
  std::variant<Tensor4<float>, Tensor4<double>> value;

  Dims4 dims() const {
    return dtype == Dtype::F32 ? std::get<Tensor4<float>>(value).dims
                               : std::get<Tensor4<double>>(value).dims;
  }
  // Widening view for comparisons.
  Tensor4<double> as_f64() const;
};

AnyTensor read_t4d(const std::string& path);

template <typename T>
Tensor4<T> read_t4d_as(const std::string& path);

// Labels format "LBL1": magic, uint32 count, int32 values, little-endian.
void write_labels(const std::string& path, const std::vector<int32_t>& labels);
std::vector<int32_t> read_labels(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace ccnn
