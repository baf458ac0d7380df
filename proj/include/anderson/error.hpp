#pragma once

#include <stdexcept>
#include <string>

namespace anderson {

enum class ErrorCode {
  invalid_argument = 1,
  dimension_mismatch = 2,
  lattice_mismatch = 3,
  not_hermitian = 4,
  not_converged = 5,
  asymmetric_operator = 6,
  config = 7,
  io = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace anderson
