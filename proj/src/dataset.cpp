#include "ccnn/dataset.hpp"

#include <filesystem>

#include <json.hpp>

#include "ccnn/io.hpp"
#include "ccnn/rng.hpp"

namespace ccnn {

using json = nlohmann::json;

namespace {

// One fixed motif per class, drawn once from the dataset seed. Values in
// [-1, 1]; distinct classes are almost surely distinguishable in every
// orientation.
std::vector<Tensor4<double>> make_motifs(const SyntheticTaskSpec& spec, Rng& rng) {
  std::vector<Tensor4<double>> motifs;
  motifs.reserve(static_cast<size_t>(spec.classes));
  for (int64_t c = 0; c < spec.classes; ++c) {
    Tensor4<double> m(Dims4{1, 1, spec.motif_size, spec.motif_size});
    for (auto& v : m.data) v = rng.uniform(-1.0, 1.0);
    motifs.push_back(std::move(m));
  }
  return motifs;
}

DataSplit make_split(const SyntheticTaskSpec& spec, const std::vector<Tensor4<double>>& motifs,
                     int64_t count, Rng& rng) {
  DataSplit split;
  split.images = Tensor4<double>(Dims4{count, 1, spec.image_size, spec.image_size});
  split.labels.resize(static_cast<size_t>(count));
  const int64_t span = spec.image_size - spec.motif_size + 1;
  for (int64_t n = 0; n < count; ++n) {
    const int32_t cls = static_cast<int32_t>(n % spec.classes);  // balanced within +-1
    split.labels[static_cast<size_t>(n)] = cls;

    int orient;
    if (spec.orientation_bias > 0.0 && rng.uniform() < spec.orientation_bias)
      orient = 0;
    else
      orient = static_cast<int>(rng.uniform_int(4));
    const int64_t oy = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(span)));
    const int64_t ox = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(span)));

    Tensor4<double> m = rotate90(motifs[static_cast<size_t>(cls)], orient);
    for (int64_t i = 0; i < spec.image_size; ++i)
      for (int64_t j = 0; j < spec.image_size; ++j)
        split.images.at(n, 0, i, j) = spec.noise * rng.normal();
    for (int64_t i = 0; i < spec.motif_size; ++i)
      for (int64_t j = 0; j < spec.motif_size; ++j)
        split.images.at(n, 0, oy + i, ox + j) += m.at(0, 0, i, j);
  }
  return split;
}

}  // namespace

DataBundle generate_dataset(const SyntheticTaskSpec& spec) {
  if (spec.image_size < spec.motif_size)
    throw ConfigError("image_size must be at least motif_size");
  if (spec.classes < 2) throw ConfigError("need at least 2 classes");
  Rng rng(spec.seed);
  const auto motifs = make_motifs(spec, rng);
  DataBundle data;
  data.train = make_split(spec, motifs, spec.train_count, rng);
  data.val = make_split(spec, motifs, spec.val_count, rng);
  data.test = make_split(spec, motifs, spec.test_count, rng);
  for (int k = 0; k < 4; ++k) data.test_rotations[static_cast<size_t>(k)] = rotate90(data.test.images, k);
  return data;
}

void write_dataset(const std::string& dir, const SyntheticTaskSpec& spec, const DataBundle& data) {
  std::filesystem::create_directories(dir);
  json meta{{"image_size", spec.image_size},
            {"classes", spec.classes},
            {"train", spec.train_count},
            {"val", spec.val_count},
            {"test", spec.test_count},
            {"noise", spec.noise},
            {"orientation_bias", spec.orientation_bias},
            {"motif_size", spec.motif_size},
            {"seed", spec.seed}};
  write_text_file(dir + "/dataset.json", meta.dump(2) + "\n");
  write_t4d(dir + "/train_images.t4d", data.train.images);
  write_labels(dir + "/train_labels.bin", data.train.labels);
  write_t4d(dir + "/val_images.t4d", data.val.images);
  write_labels(dir + "/val_labels.bin", data.val.labels);
  write_t4d(dir + "/test_images.t4d", data.test.images);
  write_labels(dir + "/test_labels.bin", data.test.labels);
  for (int k = 1; k < 4; ++k)
    write_t4d(dir + "/test_rot" + std::to_string(k) + "_images.t4d",
              data.test_rotations[static_cast<size_t>(k)]);
}

DataBundle load_dataset(const std::string& dir) {
  DataBundle data;
  data.train.images = read_t4d_as<double>(dir + "/train_images.t4d");
  data.train.labels = read_labels(dir + "/train_labels.bin");
  data.val.images = read_t4d_as<double>(dir + "/val_images.t4d");
  data.val.labels = read_labels(dir + "/val_labels.bin");
  data.test.images = read_t4d_as<double>(dir + "/test_images.t4d");
  data.test.labels = read_labels(dir + "/test_labels.bin");
  data.test_rotations[0] = data.test.images;
  for (int k = 1; k < 4; ++k)
    data.test_rotations[static_cast<size_t>(k)] =
        read_t4d_as<double>(dir + "/test_rot" + std::to_string(k) + "_images.t4d");
  return data;
}

}  // namespace ccnn
