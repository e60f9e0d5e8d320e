#pragma once

#include <stdexcept>
#include <string>

namespace rpca {

enum class ErrorKind {
  shape,
  domain,
  parameter,
  config,
  ingestion,
  split,
  iteration,
  input,
  metric,
  evaluation,
  initialization,
  unsupported_model,
  training,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline void check(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) throw Error(kind, msg);
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

}  // namespace rpca
