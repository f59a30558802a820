#include "ccnn/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ccnn {

static_assert(std::endian::native == std::endian::little,
              "tensor dump format assumes a little-endian host");

namespace {

constexpr char kTensorMagic[4] = {'T', '4', 'D', '1'};
constexpr char kLabelMagic[4] = {'L', 'B', 'L', '1'};

template <typename T>
void write_t4d_impl(const std::string& path, const Tensor4<T>& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path + " for writing");
  f.write(kTensorMagic, 4);
  const uint32_t dims[4] = {static_cast<uint32_t>(t.dims.n), static_cast<uint32_t>(t.dims.c),
                            static_cast<uint32_t>(t.dims.h), static_cast<uint32_t>(t.dims.w)};
  f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  const uint8_t code = sizeof(T);
  f.write(reinterpret_cast<const char*>(&code), 1);
  f.write(reinterpret_cast<const char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(T)));
  if (!f) throw ConfigError("write failed for " + path);
}

}  // namespace

void write_t4d(const std::string& path, const Tensor4<float>& t) { write_t4d_impl(path, t); }
void write_t4d(const std::string& path, const Tensor4<double>& t) { write_t4d_impl(path, t); }

AnyTensor read_t4d(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open tensor file " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kTensorMagic, 4) != 0)
    throw ConfigError(path + " is not a T4D1 tensor file");
  uint32_t dims[4];
  f.read(reinterpret_cast<char*>(dims), sizeof(dims));
  uint8_t code = 0;
  f.read(reinterpret_cast<char*>(&code), 1);
  if (!f) throw ConfigError(path + ": truncated tensor header");
  const Dims4 d{static_cast<int64_t>(dims[0]), static_cast<int64_t>(dims[1]),
                static_cast<int64_t>(dims[2]), static_cast<int64_t>(dims[3])};
  AnyTensor out;
  if (code == 4) {
    Tensor4<float> t(d);
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    if (!f) throw ConfigError(path + ": truncated tensor payload");
    out.dtype = Dtype::F32;
    out.value = std::move(t);
  } else if (code == 8) {
    Tensor4<double> t(d);
    f.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!f) throw ConfigError(path + ": truncated tensor payload");
    out.dtype = Dtype::F64;
    out.value = std::move(t);
  } else {
    throw ConfigError(path + ": unknown dtype code " + std::to_string(code));
  }
  return out;
}

Tensor4<double> AnyTensor::as_f64() const {
  if (dtype == Dtype::F64) return std::get<Tensor4<double>>(value);
  const auto& t = std::get<Tensor4<float>>(value);
  Tensor4<double> out(t.dims);
  for (size_t i = 0; i < t.data.size(); ++i) out.data[i] = static_cast<double>(t.data[i]);
  return out;
}

template <typename T>
Tensor4<T> read_t4d_as(const std::string& path) {
  AnyTensor any = read_t4d(path);
  if constexpr (std::is_same_v<T, double>) {
    return any.as_f64();
  } else {
    if (any.dtype == Dtype::F32) return std::get<Tensor4<float>>(any.value);
    const auto& t = std::get<Tensor4<double>>(any.value);
    Tensor4<float> out(t.dims);
    for (size_t i = 0; i < t.data.size(); ++i) out.data[i] = static_cast<float>(t.data[i]);
    return out;
  }
}

template Tensor4<float> read_t4d_as<float>(const std::string&);
template Tensor4<double> read_t4d_as<double>(const std::string&);

void write_labels(const std::string& path, const std::vector<int32_t>& labels) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path + " for writing");
  f.write(kLabelMagic, 4);
  const uint32_t count = static_cast<uint32_t>(labels.size());
  f.write(reinterpret_cast<const char*>(&count), sizeof(count));
  f.write(reinterpret_cast<const char*>(labels.data()),
          static_cast<std::streamsize>(labels.size() * sizeof(int32_t)));
  if (!f) throw ConfigError("write failed for " + path);
}

std::vector<int32_t> read_labels(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open label file " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kLabelMagic, 4) != 0)
    throw ConfigError(path + " is not a LBL1 label file");
  uint32_t count = 0;
  f.read(reinterpret_cast<char*>(&count), sizeof(count));
  std::vector<int32_t> labels(count);
  f.read(reinterpret_cast<char*>(labels.data()),
         static_cast<std::streamsize>(labels.size() * sizeof(int32_t)));
  if (!f) throw ConfigError(path + ": truncated label file");
  return labels;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path + " for writing");
  f << content;
  if (!f) throw ConfigError("write failed for " + path);
}

}  // namespace ccnn
