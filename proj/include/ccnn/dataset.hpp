#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ccnn/tensor.hpp"

namespace ccnn {

// Synthetic rotation-invariant classification task: each image carries one
// class-specific motif, planted at a random position and a random k*90-degree
// orientation, under iid Gaussian pixel noise. The label never depends on
// orientation, so it is invariant under rotating the whole image.
//
// orientation_bias skews the orientation draw toward k=0 (a "camera
// convention"): with probability `bias` the motif is planted unrotated,
// otherwise uniformly. 0 keeps the draw uniform. Labels stay
// rotation-invariant either way; the bias only makes orientation-naive models
// measurably worse on rotated copies of the test split.
struct SyntheticTaskSpec {
  int64_t image_size = 16;
  int64_t classes = 4;
  int64_t train_count = 2000;
  int64_t val_count = 500;
  int64_t test_count = 500;
  double noise = 0.3;
  double orientation_bias = 0.0;
  int64_t motif_size = 5;
  uint64_t seed = 1;
};

// One split. Images are always f64; loaders narrow to the run dtype.
struct DataSplit {
  Tensor4<double> images;
  std::vector<int32_t> labels;
};

struct DataBundle {
  DataSplit train, val, test;
  // test images under r^k for k = 0..3 (index 0 aliases test.images); labels
  // are shared with the test split.
  std::array<Tensor4<double>, 4> test_rotations;
};

DataBundle generate_dataset(const SyntheticTaskSpec& spec);

// On-disk layout under `dir`: dataset.json, {train,val,test}_images.t4d,
// {train,val,test}_labels.bin, test_rot{1,2,3}_images.t4d.
void write_dataset(const std::string& dir, const SyntheticTaskSpec& spec, const DataBundle& data);
DataBundle load_dataset(const std::string& dir);

}  // namespace ccnn
