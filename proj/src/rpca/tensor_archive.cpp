#include "rpca/tensor_archive.hpp"

#include <cstring>
#include <fstream>

#include "rpca/common.hpp"

namespace rpca {

namespace {

constexpr char kMagic[8] = {'R', 'P', 'C', 'A', 'W', '0', '0', '1'};

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  check(in.good(), ErrorKind::io, "truncated tensor archive");
  return v;
}

template <typename T>
void write_entry(std::ostream& out, const std::string& name,
                 const TensorT<T>& t, uint8_t dtype) {
  write_raw<uint32_t>(out, static_cast<uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_raw<uint8_t>(out, dtype);
  write_raw<uint32_t>(out, static_cast<uint32_t>(t.shape().size()));
  for (int d : t.shape()) write_raw<uint32_t>(out, static_cast<uint32_t>(d));
  uint64_t bytes = static_cast<uint64_t>(t.size()) * sizeof(T);
  write_raw<uint64_t>(out, bytes);
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(bytes));
}

}  // namespace

const Tensor& TensorArchive::get_f32(const std::string& name) const {
  auto it = entries_.find(name);
  check(it != entries_.end(), ErrorKind::io, "tensor missing from archive: " + name);
  const Tensor* t = std::get_if<Tensor>(&it->second);
  check(t != nullptr, ErrorKind::io, "tensor is not f32: " + name);
  return *t;
}

const DTensor& TensorArchive::get_f64(const std::string& name) const {
  auto it = entries_.find(name);
  check(it != entries_.end(), ErrorKind::io, "tensor missing from archive: " + name);
  const DTensor* t = std::get_if<DTensor>(&it->second);
  check(t != nullptr, ErrorKind::io, "tensor is not f64: " + name);
  return *t;
}

Tensor& TensorArchive::mutable_f32(const std::string& name) {
  auto it = entries_.find(name);
  check(it != entries_.end(), ErrorKind::io, "tensor missing from archive: " + name);
  Tensor* t = std::get_if<Tensor>(&it->second);
  check(t != nullptr, ErrorKind::io, "tensor is not f32: " + name);
  return *t;
}

DTensor& TensorArchive::mutable_f64(const std::string& name) {
  auto it = entries_.find(name);
  check(it != entries_.end(), ErrorKind::io, "tensor missing from archive: " + name);
  DTensor* t = std::get_if<DTensor>(&it->second);
  check(t != nullptr, ErrorKind::io, "tensor is not f64: " + name);
  return *t;
}

int64_t TensorArchive::total_elements() const {
  int64_t n = 0;
  for (const auto& [name, entry] : entries_) {
    n += std::visit([](const auto& t) { return t.size(); }, entry);
  }
  return n;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    check(out.good(), ErrorKind::io, "cannot write archive: " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    write_raw<uint32_t>(out, static_cast<uint32_t>(entries_.size()));
    for (const auto& [name, entry] : entries_) {
      if (const Tensor* t = std::get_if<Tensor>(&entry)) {
        write_entry(out, name, *t, 0);
      } else {
        write_entry(out, name, std::get<DTensor>(entry), 1);
      }
    }
    check(out.good(), ErrorKind::io, "short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), ErrorKind::io, "cannot open archive: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  check(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
        ErrorKind::io, "not a tensor archive: " + path.string());
  auto count = read_raw<uint32_t>(in);
  TensorArchive arc;
  for (uint32_t i = 0; i < count; ++i) {
    auto name_len = read_raw<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    auto dtype = read_raw<uint8_t>(in);
    auto ndim = read_raw<uint32_t>(in);
    std::vector<int> dims(ndim);
    for (auto& d : dims) d = static_cast<int>(read_raw<uint32_t>(in));
    auto bytes = read_raw<uint64_t>(in);
    if (dtype == 0) {
      Tensor t(dims);
      check(bytes == static_cast<uint64_t>(t.size()) * sizeof(float),
            ErrorKind::io, "archive size mismatch for " + name);
      in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(bytes));
      arc.put(name, std::move(t));
    } else if (dtype == 1) {
      DTensor t(dims);
      check(bytes == static_cast<uint64_t>(t.size()) * sizeof(double),
            ErrorKind::io, "archive size mismatch for " + name);
      in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(bytes));
      arc.put(name, std::move(t));
    } else {
      fail(ErrorKind::io, "unknown dtype in archive: " + name);
    }
    check(in.good(), ErrorKind::io, "truncated tensor archive: " + path.string());
  }
  return arc;
}

}  // namespace rpca
