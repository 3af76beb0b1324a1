#pragma once

#include <stdexcept>
#include <string>

namespace connectome {

enum class Errc {
  invalid_argument = 1,
  io,
  format,
  shape,
  numeric,
  not_converged,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace connectome
