#pragma once

#include <stdexcept>
#include <string>

namespace prs {

enum class Errc {
  parse,
  invalid_model,
  invalid_argument,
  diverged,
  singular,
  infeasible,
  overdetermined,
  eigensolve,
  not_positive_definite,
  no_anchor,
  no_delta,
  io,
};

const char* errc_name(Errc code) noexcept;

/// Library-wide exception. Every failure the core raises carries one of the
/// codes above so the C boundary can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace prs
