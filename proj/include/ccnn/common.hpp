#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ccnn {

// Thrown for tensor/layer dimension violations. CLI maps it to exit code 1.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown for malformed configs and spec validation failures. Exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation produces non-finite values (divergence). Exit code 2.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Dtype { F32, F64 };

inline const char* dtype_name(Dtype d) { return d == Dtype::F32 ? "f32" : "f64"; }

}  // namespace ccnn
