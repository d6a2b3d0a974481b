#include "nll/container.hpp"

#include <cstring>
#include <fstream>

#include "nll/errors.hpp"

namespace nll {

namespace {
constexpr char MAGIC[8] = {'N', 'L', 'C', 'O', 'N', 'T', '0', '1'};
}

NamedArray NamedArray::from_matrix(const std::string& name, const Matrix& m,
                                   const std::string& dtype) {
  if (dtype != "f32" && dtype != "f64") throw ValidationError("from_matrix: bad dtype " + dtype);
  NamedArray a;
  a.name = name;
  a.dtype = dtype;
  a.rows = static_cast<std::uint64_t>(m.rows);
  a.cols = static_cast<std::uint64_t>(m.cols);
  a.f = m.a;
  return a;
}

NamedArray NamedArray::from_ints(const std::string& name, const std::vector<int>& v) {
  NamedArray a;
  a.name = name;
  a.dtype = "i32";
  a.rows = v.size();
  a.cols = 1;
  a.i.assign(v.begin(), v.end());
  return a;
}

Matrix NamedArray::to_matrix() const {
  if (dtype == "i32") throw ValidationError("to_matrix: integer array " + name);
  Matrix m(static_cast<int>(rows), static_cast<int>(cols));
  m.a = f;
  return m;
}

const NamedArray& Container::get(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw IoError("container: missing array '" + name + "'");
}

bool Container::has(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return true;
  return false;
}

void save_container(const std::string& path, const Container& c) {
  nlohmann::json header;
  header["meta"] = c.meta;
  auto& dir = header["arrays"] = nlohmann::json::array();
  for (const auto& a : c.arrays) {
    dir.push_back({{"name", a.name}, {"dtype", a.dtype}, {"rows", a.rows}, {"cols", a.cols}});
  }
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out.write(MAGIC, sizeof(MAGIC));
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  for (const auto& a : c.arrays) {
    const std::uint64_t n = a.rows * a.cols;
    if (a.dtype == "i32") {
      if (a.i.size() != n) throw IoError("array size mismatch: " + a.name);
      out.write(reinterpret_cast<const char*>(a.i.data()),
                static_cast<std::streamsize>(n * sizeof(std::int32_t)));
    } else if (a.dtype == "f32") {
      if (a.f.size() != n) throw IoError("array size mismatch: " + a.name);
      std::vector<float> tmp(a.f.begin(), a.f.end());
      out.write(reinterpret_cast<const char*>(tmp.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
    } else if (a.dtype == "f64") {
      if (a.f.size() != n) throw IoError("array size mismatch: " + a.name);
      out.write(reinterpret_cast<const char*>(a.f.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
    } else {
      throw IoError("unknown dtype: " + a.dtype);
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

Container load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, MAGIC, sizeof(MAGIC)) != 0) {
    throw IoError("not a container file: " + path);
  }
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw IoError("truncated header: " + path);

  nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
  if (header.is_discarded()) throw IoError("corrupt header: " + path);

  Container c;
  c.meta = header.value("meta", nlohmann::json::object());
  for (const auto& d : header.at("arrays")) {
    NamedArray a;
    a.name = d.at("name").get<std::string>();
    a.dtype = d.at("dtype").get<std::string>();
    a.rows = d.at("rows").get<std::uint64_t>();
    a.cols = d.at("cols").get<std::uint64_t>();
    const std::uint64_t n = a.rows * a.cols;
    if (a.dtype == "i32") {
      a.i.resize(n);
      in.read(reinterpret_cast<char*>(a.i.data()),
              static_cast<std::streamsize>(n * sizeof(std::int32_t)));
    } else if (a.dtype == "f32") {
      std::vector<float> tmp(n);
      in.read(reinterpret_cast<char*>(tmp.data()),
              static_cast<std::streamsize>(n * sizeof(float)));
      a.f.assign(tmp.begin(), tmp.end());
    } else if (a.dtype == "f64") {
      a.f.resize(n);
      in.read(reinterpret_cast<char*>(a.f.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
    } else {
      throw IoError("unknown dtype in " + path + ": " + a.dtype);
    }
    if (!in) throw IoError("truncated array data: " + path);
    c.arrays.push_back(std::move(a));
  }
  return c;
}

}  // namespace nll
