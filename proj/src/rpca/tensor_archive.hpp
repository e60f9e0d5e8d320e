#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>

#include "rpca/tensor.hpp"

namespace rpca {

// Binary archive of named tensors ("RPCAW001"). Little-endian; each entry is
// name, dtype (f32/f64), dims, raw data. Used for backbone weights and
// checkpoints; byte-stable round trips back the bit-exact reload contract.
class TensorArchive {
 public:
  using Entry = std::variant<Tensor, DTensor>;

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  size_t size() const { return entries_.size(); }

  void put(const std::string& name, Tensor t) { entries_[name] = std::move(t); }
  void put(const std::string& name, DTensor t) { entries_[name] = std::move(t); }

  const Tensor& get_f32(const std::string& name) const;
  const DTensor& get_f64(const std::string& name) const;
  Tensor& mutable_f32(const std::string& name);
  DTensor& mutable_f64(const std::string& name);

  const std::map<std::string, Entry>& entries() const { return entries_; }

  int64_t total_elements() const;

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace rpca
