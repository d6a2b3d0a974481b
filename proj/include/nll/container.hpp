#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nll/matrix.hpp"

namespace nll {

/// A named array inside a Container. dtype is one of "f32", "f64", "i32".
/// Float arrays live in `f` (doubles in memory regardless of on-disk width),
/// integer arrays in `i`.
struct NamedArray {
  std::string name;
  std::string dtype;
  std::uint64_t rows = 0;
  std::uint64_t cols = 1;
  std::vector<double> f;
  std::vector<std::int32_t> i;

  static NamedArray from_matrix(const std::string& name, const Matrix& m,
                                const std::string& dtype = "f32");
  static NamedArray from_ints(const std::string& name, const std::vector<int>& v);
  Matrix to_matrix() const;
};

/// Self-describing binary container: magic, little-endian length-prefixed
/// JSON header (free-form `meta` plus the array directory), then the raw
/// arrays in directory order. One format serves datasets, checkpoints and
/// embedding dumps.
struct Container {
  nlohmann::json meta;
  std::vector<NamedArray> arrays;

  const NamedArray& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

void save_container(const std::string& path, const Container& c);
Container load_container(const std::string& path);

}  // namespace nll
